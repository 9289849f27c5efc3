#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "cxnn/train.hpp"

namespace cxnn {

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Tab-separated aggregate report, one row per variant.
inline std::string report_tsv(const MetricReport& r) {
  std::string out = "Model\tType\t" + r.metric1_name + "_mean\t" + r.metric1_name + "_std\t" +
                    r.metric2_name + "_mean\t" + r.metric2_name + "_std\tFailedFolds\n";
  for (const auto& row : r.rows) {
    int64_t failed = 0;
    for (const auto& f : row.folds) failed += f.failed;
    out += row.model_name + "\t" + row.type_label + "\t" + format_fixed(row.mean1, 6) + "\t" +
           format_fixed(row.std1, 6) + "\t" + format_fixed(row.mean2, 6) + "\t" +
           format_fixed(row.std2, 6) + "\t" + std::to_string(failed) + "\n";
  }
  return out;
}

// Per-fold detail rows.
inline std::string report_folds_tsv(const MetricReport& r) {
  std::string out =
      "Model\tType\tFold\t" + r.metric1_name + "\t" + r.metric2_name + "\tStatus\n";
  for (const auto& row : r.rows)
    for (size_t f = 0; f < row.folds.size(); ++f) {
      const auto& fr = row.folds[f];
      out += row.model_name + "\t" + row.type_label + "\t" + std::to_string(f) + "\t";
      if (fr.failed)
        out += "-\t-\tfailed\n";
      else
        out += format_fixed(fr.metric1, 6) + "\t" + format_fixed(fr.metric2, 6) + "\tok\n";
    }
  return out;
}

// Aligned text table in the mean +/- std layout.
inline std::string report_table(const MetricReport& r) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Model", "Type", r.metric1_name, r.metric2_name});
  for (const auto& row : r.rows) {
    cells.push_back({row.model_name, row.type_label,
                     format_fixed(row.mean1, 3) + " \xC2\xB1 " + format_fixed(row.std1, 3),
                     format_fixed(row.mean2, 3) + " \xC2\xB1 " + format_fixed(row.std2, 3)});
  }
  // utf-8 aware width: the +/- sign is 2 bytes, 1 column
  auto width = [](const std::string& s) {
    size_t w = 0;
    for (size_t i = 0; i < s.size(); ++i)
      if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++w;
    return w;
  };
  std::vector<size_t> widths(4, 0);
  for (const auto& row : cells)
    for (size_t c = 0; c < 4; ++c) widths[c] = std::max(widths[c], width(row[c]));
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t c = 0; c < 4; ++c) {
      out += cells[i][c];
      if (c + 1 < 4) out += std::string(widths[c] - width(cells[i][c]) + 2, ' ');
    }
    out += "\n";
    if (i == 0) {
      for (size_t c = 0; c < 4; ++c) {
        out += std::string(widths[c], '-');
        if (c + 1 < 4) out += "  ";
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace cxnn
