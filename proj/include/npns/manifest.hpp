#pragma once

// Run manifests: config hash, code version, per-check outcomes and a
// SHA-256 index of every output file. The job ledger records completed
// jobs so an interrupted run can resume without recomputing them.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace npns {

inline constexpr const char* kCodeVersion = NPNS_VERSION;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileEntry {
  std::string path;  // relative to the run directory, '/' separated
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::string kind;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;
  bool complete = true;
  std::map<std::string, std::string> checks;       // name -> status
  std::map<std::string, double> job_seconds;       // per-job runtime
  std::vector<FileEntry> files;
};

/// Index of every regular file below dir except manifest.json, sorted by path.
std::vector<FileEntry> index_files(const std::filesystem::path& dir);

/// Writes dir/manifest.json through a temporary file and a rename.
void write_manifest(const std::filesystem::path& dir, RunManifest manifest);
RunManifest read_manifest(const std::filesystem::path& dir);

class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ChecksumError naming the first file that is missing or differs.
void verify_checksums(const std::filesystem::path& dir, const RunManifest& manifest);

/// Writes bytes to path atomically (temporary file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

class JobLedger {
 public:
  /// Loads dir/jobs.json when present and `resume` is set; otherwise starts empty.
  JobLedger(std::filesystem::path dir, const std::string& config_hash, bool resume);

  bool done(const std::string& job) const { return done_.count(job) != 0; }
  void mark_done(const std::string& job);
  std::size_t completed() const { return done_.size(); }

 private:
  void save() const;
  std::filesystem::path dir_;
  std::string config_hash_;
  std::map<std::string, bool> done_;
};

}  // namespace npns
