#include "artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace hjnet::cli {

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void Artifacts::write(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::pair<fs::path, fs::path>> staged;
  for (const auto& [name, content] : files_) {
    const fs::path target = dir / name;
    const fs::path tmp = dir / (name + ".tmp");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      for (const auto& [t, _] : staged) fs::remove(t);
      fs::remove(tmp);
      throw std::runtime_error("cannot write " + tmp.string());
    }
    staged.emplace_back(tmp, target);
  }
  for (const auto& [tmp, target] : staged) fs::rename(tmp, target);
}

}  // namespace hjnet::cli
