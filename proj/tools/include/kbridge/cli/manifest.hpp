#ifndef KBRIDGE_CLI_MANIFEST_HPP_
#define KBRIDGE_CLI_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbridge/cli/config.hpp"

namespace kbridge::cli {

// SHA-1 of "blob <size>\0<content>", as git hash-object computes it.
std::string git_blob_sha1(std::string_view content);
std::string git_blob_sha1_file(const std::filesystem::path& path);

// Hash of everything that determines a run: the resolved config with CSV
// paths replaced by the hashes of their contents, plus extra input files
// (for example posterior artifacts read by simulate).
std::string input_hash(const RunConfig& cfg,
                       const std::vector<std::filesystem::path>& extra = {});

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Exclusive lock file in an output directory, removed on destruction.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kLockName = ".kbridge.lock";

}  // namespace kbridge::cli

#endif  // KBRIDGE_CLI_MANIFEST_HPP_
