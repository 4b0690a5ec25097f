#include "relevancer/eval.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "relevancer/csv.hpp"

namespace relevancer {

ConfusionMatrix::ConfusionMatrix(LabelScheme s) : scheme(std::move(s)) {
  counts.assign(scheme.size(), std::vector<std::uint64_t>(scheme.size() + 1, 0));
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::invalid() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : counts) t += row.back();
  return t;
}

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted_or_invalid, std::uint64_t n) {
  counts.at(gold).at(predicted_or_invalid) += n;
}

ConfusionMatrix confusion(const std::vector<Prediction>& preds, const LabelScheme& scheme) {
  ConfusionMatrix cm(scheme);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    if (!p.gold) throw Error(Errc::kMissingGold, "prediction " + std::to_string(i + 1) + " has no gold label");
    auto g = scheme.index_of(*p.gold);
    if (!g) throw Error(Errc::kUnknownLabel, "gold label '" + *p.gold + "' is not in scheme " + scheme.name);
    std::size_t col = cm.invalid_column();
    if (p.predicted) {
      auto pi = scheme.index_of(*p.predicted);
      if (!pi) {
        throw Error(Errc::kUnknownLabel, "predicted label '" + *p.predicted + "' is not in scheme " + scheme.name);
      }
      col = *pi;
    }
    cm.add(*g, col);
  }
  return cm;
}

namespace {
double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(Errc::kEmptyMatrix, "no predictions to score");
  const std::size_t c = cm.scheme.size();

  MetricsReport r;
  r.n = total;
  r.invalid = cm.invalid();
  std::uint64_t diag = 0;
  for (std::size_t i = 0; i < c; ++i) diag += cm.counts[i][i];
  r.accuracy = static_cast<double>(diag) / static_cast<double>(total);

  // Both averages accumulate weight * f1 in the same order, so uniform
  // support (weight == 1/c after rounding) gives bitwise-equal results.
  const double uniform = 1.0 / static_cast<double>(c);
  double macro = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    std::uint64_t tp = cm.counts[i][i];
    std::uint64_t support = 0;
    for (auto v : cm.counts[i]) support += v;
    std::uint64_t predicted = 0;
    for (std::size_t g = 0; g < c; ++g) predicted += cm.counts[g][i];

    ClassMetrics m;
    m.support = support;
    m.precision = ratio(static_cast<double>(tp), static_cast<double>(predicted));
    m.recall = ratio(static_cast<double>(tp), static_cast<double>(support));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    macro += uniform * m.f1;
    weighted += (static_cast<double>(support) / static_cast<double>(total)) * m.f1;
    r.per_class.emplace_back(cm.scheme.labels[i], m);
  }
  r.macro_f1 = macro;
  r.weighted_f1 = weighted;
  return r;
}

SortKey parse_sort_key(std::string_view text) {
  if (text == "weighted_f1") return SortKey::kWeightedF1;
  if (text == "macro_f1") return SortKey::kMacroF1;
  if (text == "accuracy") return SortKey::kAccuracy;
  if (text == "config_id") return SortKey::kConfigId;
  throw Error(Errc::kInvalidConfig, "unknown sort key '" + std::string(text) + "'");
}

std::vector<ReportRow> compare(std::vector<ReportRow> rows, SortKey key) {
  auto value = [key](const ReportRow& r) {
    switch (key) {
      case SortKey::kMacroF1: return r.metrics.macro_f1;
      case SortKey::kAccuracy: return r.metrics.accuracy;
      default: return r.metrics.weighted_f1;
    }
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const ReportRow& a, const ReportRow& b) {
    if (key != SortKey::kConfigId) {
      double va = value(a), vb = value(b);
      if (va != vb) return va > vb;
    }
    return a.config_id < b.config_id;
  });
  return rows;
}

std::string format_metric(double value) { return fmt::format("{:.3f}", value); }

std::vector<std::string> metrics_csv_header(const LabelScheme& scheme) {
  std::vector<std::string> h{"config_id", "accuracy", "macro_f1", "weighted_f1", "n", "invalid"};
  for (const auto& l : scheme.labels) {
    h.push_back(l + "_precision");
    h.push_back(l + "_recall");
    h.push_back(l + "_f1");
    h.push_back(l + "_support");
  }
  return h;
}

std::vector<std::string> metrics_csv_fields(const ReportRow& row) {
  const auto& m = row.metrics;
  std::vector<std::string> f{row.config_id,        format_metric(m.accuracy), format_metric(m.macro_f1),
                             format_metric(m.weighted_f1), std::to_string(m.n),  std::to_string(m.invalid)};
  for (const auto& [label, c] : m.per_class) {
    f.push_back(format_metric(c.precision));
    f.push_back(format_metric(c.recall));
    f.push_back(format_metric(c.f1));
    f.push_back(std::to_string(c.support));
  }
  return f;
}

void write_metrics_csv(std::ostream& out, const std::vector<ReportRow>& rows, const LabelScheme& scheme) {
  csv::write_row(out, metrics_csv_header(scheme));
  for (const auto& r : rows) csv::write_row(out, metrics_csv_fields(r));
}

namespace {

// Display width in codepoints; good enough for labels and config ids.
std::size_t width(std::string_view s) {
  std::size_t w = 0;
  for (unsigned char ch : s)
    if ((ch & 0xC0) != 0x80) ++w;
  return w;
}

std::vector<std::size_t> column_widths(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> w;
  for (const auto& row : cells) {
    if (row.size() > w.size()) w.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], width(row[i]));
  }
  return w;
}

}  // namespace

void write_aligned_table(std::ostream& out, const std::vector<std::vector<std::string>>& cells) {
  auto w = column_widths(cells);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i > 0) line += "  ";
      line += cells[r][i];
      if (i + 1 < cells[r].size()) line.append(w[i] - width(cells[r][i]), ' ');
    }
    out << line << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < w.size(); ++i) total += w[i] + (i > 0 ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
}

void write_markdown_table(std::ostream& out, const std::vector<std::vector<std::string>>& cells) {
  if (cells.empty()) return;
  auto w = column_widths(cells);
  for (auto& cw : w) cw = std::max<std::size_t>(cw, 3);
  auto emit = [&](const std::vector<std::string>& row) {
    out << '|';
    for (std::size_t i = 0; i < w.size(); ++i) {
      std::string cell = i < row.size() ? row[i] : "";
      for (std::size_t p = 0; (p = cell.find('|', p)) != std::string::npos; p += 2) cell.replace(p, 1, "\\|");
      out << ' ' << cell << std::string(w[i] > width(cell) ? w[i] - width(cell) : 0, ' ') << " |";
    }
    out << '\n';
  };
  emit(cells[0]);
  out << '|';
  for (auto cw : w) out << std::string(cw + 2, '-') << '|';
  out << '\n';
  for (std::size_t r = 1; r < cells.size(); ++r) emit(cells[r]);
}

std::string latex_row(const ReportRow& row) {
  return fmt::format("{} & {} & {} & {} \\\\", row.config_id, format_metric(row.metrics.accuracy),
                     format_metric(row.metrics.macro_f1), format_metric(row.metrics.weighted_f1));
}

void write_confusion(std::ostream& out, const ConfusionMatrix& cm) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"gold \\ predicted"};
  for (const auto& l : cm.scheme.labels) header.push_back(l);
  header.emplace_back(kInvalidColumn);
  cells.push_back(std::move(header));
  for (std::size_t g = 0; g < cm.scheme.size(); ++g) {
    std::vector<std::string> row{cm.scheme.labels[g]};
    for (auto v : cm.counts[g]) row.push_back(std::to_string(v));
    cells.push_back(std::move(row));
  }
  write_aligned_table(out, cells);
}

}  // namespace relevancer
