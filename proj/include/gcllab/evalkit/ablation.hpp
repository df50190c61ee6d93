#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/evalkit/wilcoxon.hpp"

namespace gcl {

// One finished run: which table row and dataset it belongs to, its seed and
// probe accuracy (fraction in [0,1]).
struct RunRecord {
  std::string row;
  std::string dataset;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct TableSpec {
  std::vector<std::string> rows;
  std::vector<std::string> datasets;
  std::string reference;
};

struct AblationCell {
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> p_value;
  bool p_degenerate = false;
};

struct AblationTable {
  std::vector<std::string> rows;
  std::vector<std::string> datasets;
  std::string reference;
  std::vector<std::vector<AblationCell>> cells;  // [row][dataset]
  std::vector<std::optional<double>> avg_p;      // per row, none for the reference

  const AblationCell& cell(const std::string& row, const std::string& dataset) const {
    auto r = std::find(rows.begin(), rows.end(), row);
    auto d = std::find(datasets.begin(), datasets.end(), dataset);
    if (r == rows.end() || d == datasets.end()) throw DataError("ablation: no cell " + row + "/" + dataset);
    return cells[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(d - datasets.begin())];
  }
};

class IncompleteTableError : public DataError {
 public:
  IncompleteTableError(const std::string& what, std::vector<std::string> gaps) : DataError(what), gaps_(std::move(gaps)) {}
  const std::vector<std::string>& gaps() const noexcept { return gaps_; }

 private:
  std::vector<std::string> gaps_;
};

// Rows are compared against the reference row by a Wilcoxon test over the
// seeds the two cells share. Fewer than two shared seeds, or all-equal pairs,
// give p = 1 with the degenerate flag set.
inline AblationTable build_ablation(const TableSpec& spec, const std::vector<RunRecord>& runs) {
  if (spec.rows.empty() || spec.datasets.empty()) throw ConfigError("ablation: empty rows or datasets");
  if (std::find(spec.rows.begin(), spec.rows.end(), spec.reference) == spec.rows.end())
    throw ConfigError("ablation: reference row '" + spec.reference + "' not among rows");
  std::map<std::pair<std::string, std::string>, std::map<std::uint64_t, double>> by_cell;
  for (const auto& r : runs) by_cell[{r.row, r.dataset}][r.seed] = r.accuracy;

  AblationTable t{spec.rows, spec.datasets, spec.reference, {}, {}};
  std::vector<std::string> gaps;
  for (const auto& row : spec.rows)
    for (const auto& ds : spec.datasets)
      if (!by_cell.count({row, ds})) gaps.push_back(row + "/" + ds);
  if (!gaps.empty()) {
    std::string msg = "ablation: incomplete table, missing";
    for (const auto& g : gaps) msg += " " + g;
    throw IncompleteTableError(msg, gaps);
  }

  for (const auto& row : spec.rows) {
    std::vector<AblationCell> line;
    double p_sum = 0.0;
    for (const auto& ds : spec.datasets) {
      const auto& mine = by_cell.at({row, ds});
      AblationCell c;
      for (auto [seed, acc] : mine) {
        c.seeds.push_back(seed);
        c.accuracies.push_back(acc);
      }
      const double n = static_cast<double>(c.accuracies.size());
      for (double a : c.accuracies) c.mean += a / n;
      double ss = 0.0;
      for (double a : c.accuracies) ss += (a - c.mean) * (a - c.mean);
      c.std = c.accuracies.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      if (row != spec.reference) {
        const auto& ref = by_cell.at({spec.reference, ds});
        std::vector<double> a, b;
        for (auto [seed, acc] : mine)
          if (auto it = ref.find(seed); it != ref.end()) {
            a.push_back(acc);
            b.push_back(it->second);
          }
        if (a.size() < 2) {
          c.p_value = 1.0;
          c.p_degenerate = true;
        } else {
          auto w = wilcoxon_signed_rank(a, b);
          c.p_value = w.p_value;
          c.p_degenerate = w.degenerate;
        }
        p_sum += *c.p_value;
      }
      line.push_back(std::move(c));
    }
    t.cells.push_back(std::move(line));
    if (row == spec.reference)
      t.avg_p.emplace_back(std::nullopt);
    else
      t.avg_p.emplace_back(p_sum / static_cast<double>(spec.datasets.size()));
  }
  return t;
}

inline std::string ablation_to_csv(const AblationTable& t) {
  std::ostringstream os;
  os.precision(10);
  os << "row,dataset,mean,std,n,p_value,p_degenerate\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t d = 0; d < t.datasets.size(); ++d) {
      const auto& c = t.cells[r][d];
      os << t.rows[r] << ',' << t.datasets[d] << ',' << c.mean << ',' << c.std << ',' << c.accuracies.size() << ',';
      if (c.p_value) os << *c.p_value;
      os << ',' << (c.p_degenerate ? 1 : 0) << '\n';
    }
  return os.str();
}

// Accuracies in percent as mean ± std; last column is the p-value vs the
// reference row averaged over datasets.
inline std::string ablation_to_markdown(const AblationTable& t) {
  std::ostringstream os;
  char buf[64];
  os << "| Method |";
  for (const auto& d : t.datasets) os << ' ' << d << " |";
  os << " p-value |\n|---|";
  for (std::size_t d = 0; d < t.datasets.size(); ++d) os << "---|";
  os << "---|\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << "| " << t.rows[r] << " |";
    for (const auto& c : t.cells[r]) {
      std::snprintf(buf, sizeof buf, " %.2f ± %.2f |", 100.0 * c.mean, 100.0 * c.std);
      os << buf;
    }
    if (t.avg_p[r]) {
      std::snprintf(buf, sizeof buf, " %.4f |", *t.avg_p[r]);
      os << buf << '\n';
    } else {
      os << " - |\n";
    }
  }
  return os.str();
}

}  // namespace gcl
