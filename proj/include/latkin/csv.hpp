#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "latkin/errors.hpp"

namespace latkin::cli {

// CSV writer: header row first, numbers at 17 significant digits.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& values);

    static std::string format(double v);

  private:
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace latkin::cli
