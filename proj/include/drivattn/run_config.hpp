#pragma once

// Flat key=value run configuration. Lines are `key = value`; blank lines and
// lines starting with '#' are ignored. Unknown or repeated keys are errors.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "drivattn/binary_io.hpp"
#include "drivattn/eegnet.hpp"
#include "drivattn/error.hpp"
#include "drivattn/recdata.hpp"
#include "drivattn/search.hpp"
#include "drivattn/spectral.hpp"
#include "drivattn/svm.hpp"
#include "drivattn/synthgen.hpp"

namespace drivattn {

struct SearchSettings {
  std::size_t budget = 0;  // 0 disables the search
  std::size_t folds = 5;
  SearchSpace space;
};

struct RunConfig {
  std::uint64_t seed = 1;
  LabelPolicy label;
  std::vector<BandSpec> bands = default_bands();
  EEGNetConfig eegnet;
  EEGNetConfig bands_net = bands_network_config(EEGNetConfig{});
  SvmConfig svm;
  double train_frac = 0.9;
  SynthConfig synth;
  SearchSettings search;
  std::string recordings_dir;
  std::string out_dir;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == v.size() && !v.empty(), ErrorKind::ConfigInvalid, "key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    if (!v.empty() && v[0] != '-') out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == v.size() && !v.empty(), ErrorKind::ConfigInvalid,
          "key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::ConfigInvalid, "key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, sep))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

// Shortest text that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// `name:lo:hi` per band; a trailing ']' makes the upper edge inclusive.
inline std::vector<BandSpec> parse_bands(const std::string& key, const std::string& v) {
  std::vector<BandSpec> out;
  for (auto item : split_list(v)) {
    BandSpec b;
    b.hi_inclusive = !item.empty() && item.back() == ']';
    if (b.hi_inclusive) item.pop_back();
    const auto parts = split_list(item, ':');
    require(parts.size() == 3, ErrorKind::ConfigInvalid, "key '" + key + "': band '" + item + "' is not name:lo:hi");
    b.name = parts[0];
    b.lo_hz = parse_double(key, parts[1]);
    b.hi_hz = parse_double(key, parts[2]);
    out.push_back(b);
  }
  require(!out.empty(), ErrorKind::ConfigInvalid, "key '" + key + "': no bands given");
  return out;
}

inline std::string format_bands(const std::vector<BandSpec>& bands) {
  std::string out;
  for (const auto& b : bands) {
    if (!out.empty()) out += ',';
    out += b.name + ':' + fmt_double(b.lo_hz) + ':' + fmt_double(b.hi_hz) + (b.hi_inclusive ? "]" : "");
  }
  return out;
}

struct Field {
  std::function<void(const std::string& key, const std::string& value)> set;
  std::function<std::string()> get;
};

inline Field size_field(std::size_t& f) {
  return {[&f](const std::string& k, const std::string& v) { f = static_cast<std::size_t>(parse_uint(k, v)); },
          [&f] { return std::to_string(f); }};
}
inline Field u64_field(std::uint64_t& f) {
  return {[&f](const std::string& k, const std::string& v) { f = parse_uint(k, v); }, [&f] { return std::to_string(f); }};
}
inline Field double_field(double& f) {
  return {[&f](const std::string& k, const std::string& v) { f = parse_double(k, v); }, [&f] { return fmt_double(f); }};
}
inline Field bool_field(bool& f) {
  return {[&f](const std::string& k, const std::string& v) { f = parse_bool(k, v); },
          [&f] { return std::string(f ? "true" : "false"); }};
}
inline Field string_field(std::string& f) {
  return {[&f](const std::string&, const std::string& v) { f = v; }, [&f] { return f; }};
}

inline void add_eegnet_fields(std::map<std::string, Field>& m, const std::string& prefix, EEGNetConfig& c) {
  m[prefix + "n_channels"] = size_field(c.n_channels);
  m[prefix + "n_timepoints"] = size_field(c.n_timepoints);
  m[prefix + "temporal_kernels"] = size_field(c.temporal_kernels);
  m[prefix + "temporal_len"] = size_field(c.temporal_len);
  m[prefix + "depth_multiplier"] = size_field(c.depth_multiplier);
  m[prefix + "sep_kernels"] = size_field(c.sep_kernels);
  m[prefix + "sep_len"] = size_field(c.sep_len);
  m[prefix + "pool1"] = size_field(c.pool1);
  m[prefix + "pool2"] = size_field(c.pool2);
  m[prefix + "dropout"] = double_field(c.dropout);
  m[prefix + "learning_rate"] = double_field(c.learning_rate);
  m[prefix + "batch_size"] = size_field(c.batch_size);
  m[prefix + "epochs"] = size_field(c.epochs);
  m[prefix + "elu_alpha"] = double_field(c.elu_alpha);
  m[prefix + "bn_epsilon"] = double_field(c.bn_epsilon);
  m[prefix + "bn_momentum"] = double_field(c.bn_momentum);
  m[prefix + "depthwise_max_norm"] = double_field(c.depthwise_max_norm);
  m[prefix + "dense_max_norm"] = double_field(c.dense_max_norm);
}

// Every recognised key, bound to the corresponding field of `c`.
inline std::map<std::string, Field> config_fields(RunConfig& c) {
  std::map<std::string, Field> m;
  m["seed"] = u64_field(c.seed);
  m["label.alert_percentile"] = double_field(c.label.alert_percentile);
  m["label.slow_threshold_s"] = double_field(c.label.slow_threshold_s);
  m["label.window_s"] = double_field(c.label.window_s);
  m["bands"] = {[&c](const std::string& k, const std::string& v) { c.bands = parse_bands(k, v); },
                [&c] { return format_bands(c.bands); }};
  add_eegnet_fields(m, "eegnet.", c.eegnet);
  add_eegnet_fields(m, "bands_net.", c.bands_net);
  m["svm.C"] = double_field(c.svm.C);
  m["svm.kernel"] = {[&c](const std::string& k, const std::string& v) {
                       if (v == "rbf") c.svm.kernel = KernelType::Rbf;
                       else if (v == "linear") c.svm.kernel = KernelType::Linear;
                       else fail(ErrorKind::ConfigInvalid, "key '" + k + "': expected rbf or linear, got '" + v + "'");
                     },
                     [&c] { return std::string(c.svm.kernel == KernelType::Rbf ? "rbf" : "linear"); }};
  m["svm.gamma"] = {[&c](const std::string& k, const std::string& v) {
                      if (v == "auto") c.svm.gamma.reset();
                      else c.svm.gamma = parse_double(k, v);
                    },
                    [&c] { return c.svm.gamma ? fmt_double(*c.svm.gamma) : std::string("auto"); }};
  m["svm.tol"] = double_field(c.svm.tol);
  m["svm.max_passes"] = size_field(c.svm.max_passes);
  m["svm.standardize"] = bool_field(c.svm.standardize);
  m["split.train_frac"] = double_field(c.train_frac);
  m["synth.n_subjects"] = size_field(c.synth.n_subjects);
  m["synth.trials_per_session"] = size_field(c.synth.trials_per_session);
  m["synth.sample_rate_hz"] = double_field(c.synth.sample_rate_hz);
  m["synth.n_channels"] = size_field(c.synth.n_channels);
  m["synth.effect_size"] = double_field(c.synth.effect_size);
  m["synth.rt_fast_median_s"] = double_field(c.synth.rt.fast_median_s);
  m["synth.rt_fast_sigma"] = double_field(c.synth.rt.fast_sigma);
  m["synth.rt_slow_median_s"] = double_field(c.synth.rt.slow_median_s);
  m["synth.rt_slow_sigma"] = double_field(c.synth.rt.slow_sigma);
  m["synth.posterior_channels"] = {[&c](const std::string& k, const std::string& v) {
                                     c.synth.posterior_channels.clear();
                                     for (const auto& s : split_list(v))
                                       c.synth.posterior_channels.push_back(static_cast<std::size_t>(parse_uint(k, s)));
                                   },
                                   [&c] {
                                     std::string out;
                                     for (auto ch : c.synth.posterior_channels)
                                       out += (out.empty() ? "" : ",") + std::to_string(ch);
                                     return out;
                                   }};
  m["synth.noise_uv"] = double_field(c.synth.noise_uv);
  m["synth.kplus_noise_factor"] = double_field(c.synth.kplus_noise_factor);
  m["synth.band_lo_hz"] = double_field(c.synth.band_lo_hz);
  m["synth.band_hi_hz"] = double_field(c.synth.band_hi_hz);
  m["synth.window_s"] = double_field(c.synth.window_s);
  m["search.budget"] = size_field(c.search.budget);
  m["search.folds"] = size_field(c.search.folds);
  m["search.space"] = {[&c](const std::string& k, const std::string& v) {
                         // name=v1|v2|...;name=...
                         c.search.space.clear();
                         for (const auto& dim : split_list(v, ';')) {
                           const auto eq = dim.find('=');
                           require(eq != std::string::npos, ErrorKind::ConfigInvalid,
                                   "key '" + k + "': dimension '" + dim + "' is not name=v1|v2");
                           std::vector<double> values;
                           for (const auto& s : split_list(dim.substr(eq + 1), '|')) values.push_back(parse_double(k, s));
                           c.search.space.emplace_back(trim(dim.substr(0, eq)), values);
                         }
                       },
                       [&c] {
                         std::string out;
                         for (const auto& [name, values] : c.search.space) {
                           if (!out.empty()) out += ';';
                           out += name + '=';
                           for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "|" : "") + fmt_double(values[i]);
                         }
                         return out;
                       }};
  m["paths.recordings"] = string_field(c.recordings_dir);
  m["paths.out"] = string_field(c.out_dir);
  return m;
}

}  // namespace detail

// Module invariants checked at load time. Network input sizes are taken from
// the data later, so they are not validated here.
inline void validate(const RunConfig& c) {
  validate(c.label);
  validate_bands(c.bands, c.synth.sample_rate_hz);
  validate(c.svm);
  validate(c.synth);
  require(c.train_frac > 0.0 && c.train_frac < 1.0, ErrorKind::ConfigInvalid, "split.train_frac must lie in (0,1)");
  for (const EEGNetConfig* e : {&c.eegnet, &c.bands_net}) {
    require(e->learning_rate > 0.0, ErrorKind::ConfigInvalid, "learning_rate must be positive");
    require(e->dropout >= 0.0 && e->dropout < 1.0, ErrorKind::ConfigInvalid, "dropout must lie in [0,1)");
    require(e->batch_size >= 1 && e->epochs >= 1, ErrorKind::ConfigInvalid, "batch_size and epochs must be positive");
    require(e->temporal_kernels >= 1 && e->temporal_len >= 1 && e->depth_multiplier >= 1 && e->sep_kernels >= 1 &&
                e->sep_len >= 1 && e->pool1 >= 1 && e->pool2 >= 1,
            ErrorKind::ConfigInvalid, "network sizes must be positive");
  }
  if (c.search.budget > 0) {
    require(c.search.folds >= 2, ErrorKind::ConfigInvalid, "search.folds must be at least 2");
    for (const auto& [name, values] : c.search.space) {
      require(!values.empty(), ErrorKind::EmptySpace, "search dimension '" + name + "' has no candidates");
      EEGNetConfig probe;
      set_hyperparameter(probe, name, values.front());
    }
  }
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  auto fields = detail::config_fields(c);
  auto it = fields.find(key);
  require(it != fields.end(), ErrorKind::ConfigInvalid, "unknown config key '" + key + "'");
  it->second.set(key, value);
}

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  auto fields = detail::config_fields(c);
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::ConfigInvalid,
            "line " + std::to_string(lineno) + ": expected key = value, got '" + t + "'");
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::trim(t.substr(eq + 1));
    auto it = fields.find(key);
    require(it != fields.end(), ErrorKind::ConfigInvalid,
            "line " + std::to_string(lineno) + ": unknown config key '" + key + "'");
    require(seen.emplace(key, lineno).second, ErrorKind::ConfigInvalid,
            "line " + std::to_string(lineno) + ": key '" + key + "' repeated");
    it->second.set(key, value);
  }
  validate(c);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file_text(path)); }

// Every key with its value, in sorted key order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, f] : detail::config_fields(copy)) out.emplace_back(key, f.get());
  return out;
}

// Canonical text; parsing it yields the same config.
inline std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : config_entries(cfg)) out += key + " = " + value + '\n';
  return out;
}

// FNV-1a over the canonical text.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace drivattn
