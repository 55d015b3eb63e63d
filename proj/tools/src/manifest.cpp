#include "kbridge/cli/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "kbridge/error.hpp"

namespace kbridge::cli {
namespace fs = std::filesystem;

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  const bool ok =
      ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
      EVP_DigestUpdate(ctx, header.data(), header.size() + 1) == 1 &&
      EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
      EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

std::string git_blob_sha1_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  return git_blob_sha1(content);
}

std::string input_hash(const RunConfig& cfg, const std::vector<fs::path>& extra) {
  RunConfig canonical = cfg;
  auto replace = [](fs::path& p) {
    if (!p.empty()) p = "sha1:" + git_blob_sha1_file(p);
  };
  replace(canonical.drift.csv);
  replace(canonical.sigma.csv);
  replace(canonical.killing.csv);
  replace(canonical.rho0_csv);
  replace(canonical.q_csv);
  canonical.posterior_dir.clear();
  nlohmann::json j = to_json(canonical);
  for (const fs::path& p : extra) {
    j["inputs"][p.filename().string()] = git_blob_sha1_file(p);
  }
  return git_blob_sha1(j.dump());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("write failed: " + path.string());
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / kLockName) {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw InputError("output directory " + dir.string() +
                       " is locked by another run (remove " +
                       path_.string() + " if stale)");
    }
    throw InputError("cannot create " + path_.string() + ": " +
                     std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace kbridge::cli
