#include "npns/manifest.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace npns {

namespace {

std::string hex(const unsigned char* data, unsigned len) {
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += fmt::format("{:02x}", data[i]);
  return out;
}

struct Digest {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  Digest() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("SHA-256 initialisation failed");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx.get(), data, n); }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    return hex(md, len);
  }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Digest d;
  d.update(bytes.data(), bytes.size());
  return d.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  Digest d;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    d.update(buf, static_cast<std::size_t>(is.gcount()));
  }
  return d.finish();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << bytes;
    if (!os) throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<FileEntry> index_files(const std::filesystem::path& dir) {
  std::vector<FileEntry> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json" || rel.ends_with(".tmp")) continue;
    out.push_back({rel, sha256_file(e.path()), e.file_size()});
  }
  std::sort(out.begin(), out.end(), [](const FileEntry& a, const FileEntry& b) { return a.path < b.path; });
  return out;
}

void write_manifest(const std::filesystem::path& dir, RunManifest m) {
  m.files = index_files(dir);
  nlohmann::ordered_json j;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["kind"] = m.kind;
  j["seed"] = m.seed;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  j["status"] = m.complete ? "complete" : "incomplete";
  j["checks"] = m.checks;
  j["job_seconds"] = m.job_seconds;
  auto& files = j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("missing manifest.json in " + dir.string());
  const auto j = nlohmann::json::parse(is);
  RunManifest m;
  m.config_hash = j.at("config_hash");
  m.code_version = j.at("code_version");
  m.kind = j.at("kind");
  m.seed = j.at("seed");
  m.wall_clock_seconds = j.at("wall_clock_seconds");
  m.complete = j.at("status") == "complete";
  m.checks = j.at("checks").get<std::map<std::string, std::string>>();
  m.job_seconds = j.at("job_seconds").get<std::map<std::string, double>>();
  for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("sha256"), f.at("bytes")});
  return m;
}

void verify_checksums(const std::filesystem::path& dir, const RunManifest& m) {
  for (const auto& f : m.files) {
    const auto p = dir / f.path;
    if (!std::filesystem::exists(p)) throw ChecksumError("checksum failure: missing " + f.path);
    if (sha256_file(p) != f.sha256) throw ChecksumError("checksum failure: " + f.path + " was modified");
  }
}

JobLedger::JobLedger(std::filesystem::path dir, const std::string& config_hash, bool resume)
    : dir_(std::move(dir)), config_hash_(config_hash) {
  const auto path = dir_ / "jobs.json";
  if (!resume || !std::filesystem::exists(path)) return;
  std::ifstream is(path);
  const auto j = nlohmann::json::parse(is);
  if (j.at("config_hash") != config_hash_)
    throw std::runtime_error("cannot resume: the job ledger belongs to a different configuration");
  for (const auto& job : j.at("done")) done_[job.get<std::string>()] = true;
}

void JobLedger::mark_done(const std::string& job) {
  done_[job] = true;
  save();
}

void JobLedger::save() const {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash_;
  auto& list = j["done"] = nlohmann::ordered_json::array();
  for (const auto& [k, v] : done_) list.push_back(k);
  write_file_atomic(dir_ / "jobs.json", j.dump(2) + "\n");
}

}  // namespace npns
