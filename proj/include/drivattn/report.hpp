#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/evalstats.hpp"
#include "drivattn/recdata.hpp"

namespace drivattn {

struct CellKey {
  std::string model;  // svm | eegnet
  std::string input;  // bands | raw
  Session session = Session::KPlus;
  std::string protocol;  // mixed | loso

  auto tie() const { return std::tie(model, input, session, protocol); }
  bool operator==(const CellKey& o) const { return tie() == o.tie(); }
  bool operator<(const CellKey& o) const { return tie() < o.tie(); }
};

struct ReportRow {
  CellKey cell;
  double accuracy_pct = 0.0;
  std::optional<std::size_t> fold;       // LOSO per-fold rows only
  std::optional<std::uint16_t> subject;  // LOSO per-fold rows only

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::vector<std::pair<std::string, double>> statistics;

  std::optional<double> cell(const CellKey& key) const {
    for (const auto& r : rows)
      if (r.cell == key && !r.fold) return r.accuracy_pct;
    return std::nullopt;
  }

  std::map<std::uint16_t, double> per_subject(const CellKey& key) const {
    std::map<std::uint16_t, double> out;
    for (const auto& r : rows)
      if (r.cell == key && r.subject) out[*r.subject] = r.accuracy_pct;
    return out;
  }

  std::size_t fold_count(const CellKey& key) const { return per_subject(key).size(); }
};

inline std::string_view model_family(std::string_view kind) { return kind == "svm" ? "svm" : "eegnet"; }
inline std::string_view model_input(std::string_view kind) { return kind == "eegnet-raw" ? "raw" : "bands"; }

inline void add_mixed(EvalReport& rep, const CellKey& key, double accuracy) {
  rep.rows.push_back({key, 100.0 * accuracy, std::nullopt, std::nullopt});
}

// One row per fold plus the aggregate (mean of fold accuracies).
inline void add_loso(EvalReport& rep, const CellKey& key, const LosoResult& res) {
  for (std::size_t f = 0; f < res.folds.size(); ++f)
    rep.rows.push_back({key, 100.0 * res.folds[f].accuracy, f, res.folds[f].subject});
  rep.rows.push_back({key, 100.0 * res.mean, std::nullopt, std::nullopt});
}

// Table order: rows (svm,bands) (eegnet,bands) (eegnet,raw); columns mixed
// K+, mixed K-, loso K+, loso K-.
inline std::vector<CellKey> table_cells() {
  std::vector<CellKey> out;
  const std::pair<const char*, const char*> models[] = {{"svm", "bands"}, {"eegnet", "bands"}, {"eegnet", "raw"}};
  for (const auto& [m, in] : models)
    for (const char* proto : {"mixed", "loso"})
      for (Session s : {Session::KPlus, Session::KMinus}) out.push_back({m, in, s, proto});
  return out;
}

// Reference accuracies from the original study, for side-by-side display only.
inline EvalReport reference_report() {
  const double values[3][4] = {{82.46, 85.71, 69.73, 77.20}, {83.12, 80.52, 68.80, 71.75}, {88.96, 81.82, 75.51, 69.35}};
  const std::pair<const char*, const char*> models[] = {{"svm", "bands"}, {"eegnet", "bands"}, {"eegnet", "raw"}};
  EvalReport rep;
  for (int r = 0; r < 3; ++r) {
    const auto& [m, in] = models[r];
    rep.rows.push_back({{m, in, Session::KPlus, "mixed"}, values[r][0], std::nullopt, std::nullopt});
    rep.rows.push_back({{m, in, Session::KMinus, "mixed"}, values[r][1], std::nullopt, std::nullopt});
    rep.rows.push_back({{m, in, Session::KPlus, "loso"}, values[r][2], std::nullopt, std::nullopt});
    rep.rows.push_back({{m, in, Session::KMinus, "loso"}, values[r][3], std::nullopt, std::nullopt});
  }
  return rep;
}

inline std::string report_csv(const EvalReport& rep) {
  std::ostringstream out;
  out << "model,input,session,protocol,accuracy_pct,fold,subject_id\n";
  char buf[64];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.accuracy_pct);
    out << r.cell.model << ',' << r.cell.input << ',' << to_string(r.cell.session) << ',' << r.cell.protocol << ','
        << buf << ',';
    if (r.fold) out << *r.fold;
    out << ',';
    if (r.subject) out << *r.subject;
    out << '\n';
  }
  return out.str();
}

inline EvalReport parse_report_csv(const std::string& text) {
  EvalReport rep;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      require(line == "model,input,session,protocol,accuracy_pct,fold,subject_id", ErrorKind::Format,
              "unexpected report header '" + line + "'");
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    require(cells.size() == 7, ErrorKind::Format, "report row needs 7 columns: '" + line + "'");
    ReportRow r;
    r.cell = {cells[0], cells[1], parse_session(cells[2]), cells[3]};
    try {
      r.accuracy_pct = std::stod(cells[4]);
      if (!cells[5].empty()) r.fold = std::stoull(cells[5]);
      if (!cells[6].empty()) r.subject = static_cast<std::uint16_t>(std::stoul(cells[6]));
    } catch (const std::exception&) {
      fail(ErrorKind::Format, "bad number in report row '" + line + "'");
    }
    rep.rows.push_back(r);
  }
  return rep;
}

inline std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Accuracy grid in the published table layout; every requested cell must be
// present.
inline std::string render_table(const EvalReport& rep, const std::vector<CellKey>& requested) {
  require(!requested.empty() && !rep.rows.empty(), ErrorKind::MissingCell, "no cells to render");
  for (const auto& k : requested)
    require(rep.cell(k).has_value(), ErrorKind::MissingCell,
            "missing cell " + k.model + "/" + k.input + "/" + std::string(to_string(k.session)) + "/" + k.protocol);
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-34s %-17s %-17s\n", "Model", "Mixed-Subject", "Inter-Subject");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-34s %-8s %-8s %-8s %-8s\n", "", "K+", "K-", "K+", "K-");
  out << buf;
  const std::tuple<const char*, const char*, const char*> models[] = {
      {"svm", "bands", "SVM on EEG spectral features"},
      {"eegnet", "bands", "EEGNet on EEG spectral features"},
      {"eegnet", "raw", "EEGNet on raw EEG"}};
  for (const auto& [m, in, label] : models) {
    std::string cols;
    bool any = false;
    for (const char* proto : {"mixed", "loso"})
      for (Session s : {Session::KPlus, Session::KMinus}) {
        const auto v = rep.cell({m, in, s, proto});
        any |= v.has_value();
        std::snprintf(buf, sizeof buf, "%-8s ", v ? format_pct(*v).c_str() : "-");
        cols += buf;
      }
    if (!any) continue;
    std::snprintf(buf, sizeof buf, "%-34s %s\n", label, cols.c_str());
    out << buf;
  }
  return out.str();
}

// Per-subject LOSO accuracies, one column per LOSO cell.
inline std::string render_subject_table(const EvalReport& rep) {
  std::vector<CellKey> keys;
  std::map<std::uint16_t, std::map<std::size_t, double>> grid;
  for (const auto& r : rep.rows) {
    if (!r.subject) continue;
    auto it = std::find(keys.begin(), keys.end(), r.cell);
    if (it == keys.end()) {
      keys.push_back(r.cell);
      it = keys.end() - 1;
    }
    grid[*r.subject][static_cast<std::size_t>(it - keys.begin())] = r.accuracy_pct;
  }
  if (keys.empty()) return {};
  std::ostringstream out;
  out << "subject";
  for (const auto& k : keys) out << ',' << k.model << '-' << k.input << '-' << to_string(k.session);
  out << '\n';
  for (const auto& [subject, row] : grid) {
    out << subject;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      out << ',';
      if (auto it = row.find(i); it != row.end()) out << format_pct(it->second);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string render_statistics(const EvalReport& rep) {
  std::ostringstream out;
  char buf[64];
  for (const auto& [k, v] : rep.statistics) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    out << k << '=' << buf << '\n';
  }
  for (const auto& [k, v] : rep.seeds) out << "seed." << k << '=' << v << '\n';
  return out.str();
}

inline std::string emit_report(const EvalReport& rep, const std::vector<CellKey>& requested) {
  std::string out = render_table(rep, requested);
  if (auto subj = render_subject_table(rep); !subj.empty()) out += "\n[per-subject LOSO accuracy, %]\n" + subj;
  if (!rep.statistics.empty() || !rep.seeds.empty()) out += "\n[statistics]\n" + render_statistics(rep);
  return out;
}

}  // namespace drivattn
