#ifndef HJNET_SRC_CLI_ARTIFACTS_HPP_
#define HJNET_SRC_CLI_ARTIFACTS_HPP_

#include <filesystem>
#include <map>
#include <string>

namespace hjnet::cli {

// Shortest round-trip form of a double; NaN becomes an empty CSV field.
std::string csv_number(double v);

// Files of one run, written together once everything has been computed.
// Each file goes to name.tmp first and is renamed into place.
class Artifacts {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  void write(const std::filesystem::path& dir) const;
  const std::map<std::string, std::string>& files() const { return files_; }

 private:
  std::map<std::string, std::string> files_;
};

}  // namespace hjnet::cli

#endif  // HJNET_SRC_CLI_ARTIFACTS_HPP_
