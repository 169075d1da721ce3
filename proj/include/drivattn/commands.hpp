#pragma once

// Subcommand implementations behind the command-line tool. Each returns a
// process exit code and writes its outputs plus a manifest under `out`.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "drivattn/atdr.hpp"
#include "drivattn/features.hpp"
#include "drivattn/pipeline.hpp"
#include "drivattn/report.hpp"
#include "drivattn/run_config.hpp"
#include "drivattn/stats.hpp"
#include "drivattn/synthgen.hpp"

namespace drivattn {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitIo = 3, kExitData = 4, kExitValidation = 5 };

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::EmptySpace: return kExitConfig;
    case ErrorKind::Io:
    case ErrorKind::Format: return kExitIo;
    case ErrorKind::EmptyInput:
    case ErrorKind::SingleClassInput:
    case ErrorKind::EmptyDataset:
    case ErrorKind::TooFewRows:
    case ErrorKind::TooFewSubjects:
    case ErrorKind::AllZeroDifferences:
    case ErrorKind::TooFewPairs:
    case ErrorKind::ZeroVariance:
    case ErrorKind::TooFewTrials:
    case ErrorKind::MissingCell:
    case ErrorKind::SubjectMismatch: return kExitData;
    default: return kExitValidation;
  }
}

struct CommandOptions {
  std::string config_path;  // empty -> defaults
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;

  // pipeline / label / features / stats
  std::string recordings_dir;
  std::string model = "svm";       // svm | eegnet-raw | eegnet-bands | all
  std::string protocol = "mixed";  // mixed | loso | all
  std::string session = "kplus";   // kplus | kminus | all

  // stats / report
  std::vector<std::string> reports;
  bool with_reference = false;
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

// Collects written files so the manifest can list their sizes and hashes.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& rel, const std::string& text) { write(rel, text.data(), text.size()); }
  void write(const std::string& rel, const std::vector<unsigned char>& bytes) { write(rel, bytes.data(), bytes.size()); }

  void write(const std::string& rel, const void* data, std::size_t n) {
    const auto path = dir_ / rel;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    write_file_atomic(path, data, n);
    files_.push_back({{"path", rel}, {"bytes", n}, {"fnv1a64", hex64(fnv1a(data, n))}});
  }

  const nlohmann::json& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json files_ = nlohmann::json::array();
};

inline RunConfig resolve_config(const CommandOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  cfg.synth.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

inline std::string out_dir(const CommandOptions& o, const RunConfig& cfg) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  return "out";
}

inline std::string recordings_dir(const CommandOptions& o, const RunConfig& cfg) {
  const std::string dir = !o.recordings_dir.empty() ? o.recordings_dir : cfg.recordings_dir;
  require(!dir.empty(), ErrorKind::ConfigInvalid, "no recordings directory given (--recordings or paths.recordings)");
  return dir;
}

inline nlohmann::json base_manifest(const std::string& command, const RunConfig& cfg) {
  nlohmann::json m;
  m["tool"] = "drivattn";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["formats"] = {{"atdr", kAtdrVersion}, {"datm", kDatmVersion}};
  m["config_hash"] = hex64(config_hash(cfg));
  m["config"] = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) m["config"][k] = v;
  m["seed"] = cfg.seed;
  return m;
}

inline void finish_manifest(OutputSet& out, nlohmann::json m) {
  m["outputs"] = out.files();
  out.write("manifest.json", m.dump(2) + "\n");
}

inline nlohmann::json describe_inputs(const std::vector<std::filesystem::path>& paths) {
  auto arr = nlohmann::json::array();
  for (const auto& p : paths) {
    const auto bytes = read_file_bytes(p);
    arr.push_back({{"path", p.filename().string()}, {"bytes", bytes.size()},
                   {"fnv1a64", hex64(fnv1a(bytes.data(), bytes.size()))}});
  }
  return arr;
}

inline std::vector<std::filesystem::path> list_recordings(const std::string& dir) {
  std::error_code ec;
  require(std::filesystem::is_directory(dir, ec), ErrorKind::Io, "recordings directory " + dir + " not found");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".atdr") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  require(!out.empty(), ErrorKind::Io, "no .atdr files in " + dir);
  return out;
}

inline std::vector<Recording> load_recordings(const std::vector<std::filesystem::path>& paths) {
  std::vector<Recording> out;
  for (const auto& p : paths) out.push_back(read_atdr(p));
  return out;
}

inline std::vector<std::string> expand(const std::string& v, std::vector<std::string> all) {
  if (v == "all") return all;
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::vector<Session> sessions_of(const std::string& v) {
  std::vector<Session> out;
  for (const auto& s : expand(v, {"kplus", "kminus"})) out.push_back(parse_session(s));
  return out;
}

inline void say(const CommandOptions& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << '\n';
}

inline std::string synth_file_name(std::uint16_t subject, Session s) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sub%02u_%s.atdr", static_cast<unsigned>(subject), std::string(to_string(s)).c_str());
  return buf;
}

inline std::string labels_csv(const std::vector<Recording>& recordings, const LabelPolicy& policy) {
  std::ostringstream out;
  out << "subject,session,trial,rt_s,label\n";
  for (const auto& rec : recordings) {
    if (rec.events.empty()) continue;
    const auto rts = compute_reaction_times(rec);
    const auto labels = label_trials(rts, policy);
    for (std::size_t i = 0; i < rts.size(); ++i)
      out << rec.subject_id << ',' << to_string(rec.session) << ',' << i << ',' << format_sig9(rts[i]) << ','
          << to_string(labels[i]) << '\n';
  }
  return out.str();
}

// The single LOSO cell of a report (per-subject rows present).
inline CellKey loso_cell(const EvalReport& rep, const std::string& name) {
  std::vector<CellKey> keys;
  for (const auto& r : rep.rows)
    if (r.subject && std::find(keys.begin(), keys.end(), r.cell) == keys.end()) keys.push_back(r.cell);
  require(!keys.empty(), ErrorKind::MissingCell, name + " has no per-subject LOSO rows");
  require(keys.size() == 1, ErrorKind::ConfigInvalid, name + " holds several LOSO cells; pass single-cell reports");
  return keys.front();
}

}  // namespace detail

inline int cmd_synth(const CommandOptions& o) {
  const auto cfg = detail::resolve_config(o);
  detail::OutputSet out(detail::out_dir(o, cfg));
  const auto ds = generate_dataset(cfg.synth);
  for (const auto& rec : ds.recordings)
    out.write(detail::synth_file_name(rec.subject_id, rec.session), encode_atdr(rec));
  out.write("ground_truth.csv", ground_truth_csv(ds.truth));
  detail::say(o, "wrote " + std::to_string(ds.recordings.size()) + " recordings to " + out.dir().string());
  detail::finish_manifest(out, detail::base_manifest("synth", cfg));
  return kExitOk;
}

inline int cmd_label(const CommandOptions& o) {
  const auto cfg = detail::resolve_config(o);
  const auto paths = detail::list_recordings(detail::recordings_dir(o, cfg));
  auto recordings = detail::load_recordings(paths);
  if (o.session != "all") {
    std::vector<Recording> keep;
    for (auto s : detail::sessions_of(o.session)) {
      auto part = filter_session(recordings, s);
      keep.insert(keep.end(), part.begin(), part.end());
    }
    recordings = std::move(keep);
  }
  detail::OutputSet out(detail::out_dir(o, cfg));
  out.write("labels.csv", detail::labels_csv(recordings, cfg.label));
  auto m = detail::base_manifest("label", cfg);
  m["inputs"] = detail::describe_inputs(paths);
  detail::finish_manifest(out, m);
  return kExitOk;
}

inline int cmd_features(const CommandOptions& o) {
  const auto cfg = detail::resolve_config(o);
  const auto paths = detail::list_recordings(detail::recordings_dir(o, cfg));
  const auto recordings = detail::load_recordings(paths);
  detail::OutputSet out(detail::out_dir(o, cfg));
  for (auto s : detail::sessions_of(o.session)) {
    const auto selected = filter_session(recordings, s);
    if (selected.empty()) continue;
    const double fs = common_sample_rate(selected);
    const auto labeled = build_labeled_set(selected, cfg.label);
    require(!labeled.epochs.empty(), ErrorKind::EmptyDataset, "no labeled epochs for " + std::string(to_string(s)));
    const auto rows = extract_features(labeled.epochs, fs, cfg.bands);
    out.write("features_" + std::string(to_string(s)) + ".csv",
              features_csv(rows, labeled.epochs.front().data.rows(), cfg.bands));
  }
  auto m = detail::base_manifest("features", cfg);
  m["inputs"] = detail::describe_inputs(paths);
  detail::finish_manifest(out, m);
  return kExitOk;
}

inline int cmd_pipeline(const CommandOptions& o) {
  const auto cfg = detail::resolve_config(o);
  const auto paths = detail::list_recordings(detail::recordings_dir(o, cfg));
  const auto recordings = detail::load_recordings(paths);
  detail::OutputSet out(detail::out_dir(o, cfg));
  EvalReport merged;
  auto runs = nlohmann::json::array();
  for (const auto& model : detail::expand(o.model, {"svm", "eegnet-bands", "eegnet-raw"}))
    for (const auto& proto : detail::expand(o.protocol, {"mixed", "loso"}))
      for (auto session : detail::sessions_of(o.session)) {
        const PipelineRequest req{parse_model_kind(model), parse_protocol(proto), session};
        const std::string tag = model + "_" + proto + "_" + std::string(to_string(session));
        detail::say(o, "running " + tag);
        auto res = run_pipeline(cfg, req, recordings);
        for (auto& m : res.models) out.write("models/" + tag + "_" + m.name + ".datm", m.bytes);
        merged.rows.insert(merged.rows.end(), res.report.rows.begin(), res.report.rows.end());
        merged.seeds = res.report.seeds;
        res.manifest["counts"] = {{"attentive", res.counts.attentive},
                                  {"inattentive", res.counts.inattentive},
                                  {"excluded", res.counts.excluded},
                                  {"out_of_bounds", res.counts.out_of_bounds}};
        runs.push_back(res.manifest["request"]);
        runs.back()["counts"] = res.manifest["counts"];
        const auto cell = res.report.rows.back().cell;
        detail::say(o, "  accuracy " + format_pct(*res.report.cell(cell)) + "%");
      }
  out.write("report.csv", report_csv(merged));
  std::vector<CellKey> cells;
  for (const auto& r : merged.rows)
    if (!r.fold && std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
  const auto text = emit_report(merged, cells);
  out.write("report.txt", text);
  if (!o.quiet) std::cout << text;
  auto m = detail::base_manifest("pipeline", cfg);
  m["inputs"] = detail::describe_inputs(paths);
  m["runs"] = runs;
  nlohmann::json s = nlohmann::json::object();
  for (const auto& [k, v] : merged.seeds) s[k] = v;
  m["seeds"] = s;
  detail::finish_manifest(out, m);
  return kExitOk;
}

// Pairs per-subject LOSO accuracies of two reports (Wilcoxon); with
// recordings, also correlates the first report's accuracies with RT dispersion.
inline EvalReport compare_reports(const EvalReport& a, const EvalReport& b,
                                  const std::vector<Recording>* recordings = nullptr) {
  const auto ka = detail::loso_cell(a, "first report");
  const auto kb = detail::loso_cell(b, "second report");
  const auto sa = a.per_subject(ka), sb = b.per_subject(kb);
  std::vector<std::uint16_t> subjects;
  for (const auto& [s, v] : sa) subjects.push_back(s);
  std::vector<std::uint16_t> other;
  for (const auto& [s, v] : sb) other.push_back(s);
  require(subjects == other, ErrorKind::SubjectMismatch, "reports cover different subject sets");
  std::vector<double> xa, xb;
  for (auto s : subjects) {
    xa.push_back(sa.at(s));
    xb.push_back(sb.at(s));
  }
  EvalReport out;
  const auto w = wilcoxon_signed_ranks(xa, xb);
  out.statistics = {{"wilcoxon_z", w.statistic}, {"wilcoxon_p", w.p_value}, {"n", static_cast<double>(w.n)}};
  if (recordings) {
    std::vector<double> disp;
    for (auto s : subjects) disp.push_back(rt_dispersion(*recordings, s, ka.session));
    const auto p = pearson(disp, xa);
    out.statistics.push_back({"pearson_r", p.statistic});
    out.statistics.push_back({"pearson_p", p.p_value});
    out.statistics.push_back({"pearson_n", static_cast<double>(p.n)});
  }
  return out;
}

inline int cmd_stats(const CommandOptions& o) {
  require(o.reports.size() == 2, ErrorKind::ConfigInvalid, "stats needs exactly two report files");
  const auto cfg = detail::resolve_config(o);
  const auto a = parse_report_csv(read_file_text(o.reports[0]));
  const auto b = parse_report_csv(read_file_text(o.reports[1]));
  std::vector<std::filesystem::path> inputs{o.reports[0], o.reports[1]};
  std::optional<std::vector<Recording>> recordings;
  const std::string rec_dir = !o.recordings_dir.empty() ? o.recordings_dir : cfg.recordings_dir;
  if (!rec_dir.empty()) {
    const auto paths = detail::list_recordings(rec_dir);
    recordings = detail::load_recordings(paths);
    inputs.insert(inputs.end(), paths.begin(), paths.end());
  }
  const auto res = compare_reports(a, b, recordings ? &*recordings : nullptr);
  const auto text = render_statistics(res);
  detail::OutputSet out(detail::out_dir(o, cfg));
  out.write("stats.txt", text);
  if (!o.quiet) std::cout << text;
  auto m = detail::base_manifest("stats", cfg);
  m["inputs"] = detail::describe_inputs(inputs);
  detail::finish_manifest(out, m);
  return kExitOk;
}

// Merges report CSVs into one grid; optionally adds the reference values.
inline int cmd_report(const CommandOptions& o) {
  require(!o.reports.empty(), ErrorKind::ConfigInvalid, "report needs at least one report file");
  const auto cfg = detail::resolve_config(o);
  EvalReport merged;
  std::vector<std::filesystem::path> inputs;
  for (const auto& p : o.reports) {
    const auto r = parse_report_csv(read_file_text(p));
    merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    inputs.emplace_back(p);
  }
  std::vector<CellKey> cells;
  for (const auto& r : merged.rows)
    if (!r.fold && std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
  std::string text = emit_report(merged, cells);
  if (o.with_reference) text += "\n[reference]\n" + render_table(reference_report(), table_cells());
  detail::OutputSet out(detail::out_dir(o, cfg));
  out.write("report.csv", report_csv(merged));
  out.write("report.txt", text);
  if (!o.quiet) std::cout << text;
  auto m = detail::base_manifest("report", cfg);
  m["inputs"] = detail::describe_inputs(inputs);
  detail::finish_manifest(out, m);
  return kExitOk;
}

// Runs `fn`, converting library errors into exit codes with a message on stderr.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace drivattn
