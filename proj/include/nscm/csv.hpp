#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "nscm/common.hpp"

namespace nscm {

// Minimal CSV writer. Doubles are printed with max_digits10 so files written
// from the same seed are byte-identical across runs.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw Error("cannot open output file: " + path);
    out_.precision(17);
  }

  void header(std::initializer_list<std::string> names) {
    header(std::vector<std::string>(names));
  }

  void header(const std::vector<std::string>& names) {
    bool first = true;
    for (const auto& n : names) {
      if (!first) out_ << ',';
      out_ << n;
      first = false;
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << values[i];
    }
    out_ << '\n';
  }

  std::ofstream& stream() { return out_; }

 private:
  std::ofstream out_;
};

}  // namespace nscm
