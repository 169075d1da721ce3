#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drivattn/eegnet.hpp"
#include "drivattn/recdata.hpp"
#include "drivattn/spectral.hpp"

namespace drivattn {

// Band powers of one epoch, channel-major then band order (uV^2/Hz).
struct FeatureVector {
  std::uint16_t subject_id = 0;
  Session session = Session::KMinus;
  TrialLabel label = TrialLabel::Attentive;
  std::vector<double> values;
};

inline FeatureVector extract_features(const LabeledEpoch& epoch, double fs, const std::vector<BandSpec>& bands) {
  return {epoch.subject_id, epoch.session, epoch.label, band_powers(epoch.data, fs, bands)};
}

inline std::vector<FeatureVector> extract_features(const std::vector<LabeledEpoch>& epochs, double fs,
                                                   const std::vector<BandSpec>& bands) {
  std::vector<FeatureVector> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(extract_features(e, fs, bands));
  return out;
}

inline std::string features_csv(const std::vector<FeatureVector>& rows, std::size_t n_channels,
                                const std::vector<BandSpec>& bands) {
  std::ostringstream out;
  out << "subject,session,label";
  for (std::size_t c = 0; c < n_channels; ++c)
    for (const auto& b : bands) out << ",ch" << c << '_' << b.name;
  out << '\n';
  for (const auto& r : rows) {
    require(r.values.size() == n_channels * bands.size(), ErrorKind::LengthMismatch, "feature row has wrong length");
    out << r.subject_id << ',' << to_string(r.session) << ',' << to_string(r.label);
    for (double v : r.values) out << ',' << format_sig9(v);
    out << '\n';
  }
  return out.str();
}

// Reshapes channel-major band-power vectors into C x n_bands network inputs.
inline EEGDataset spectral_input_adapter(const std::vector<FeatureVector>& rows, std::size_t n_channels,
                                         std::size_t n_bands = 5) {
  EEGDataset ds{n_channels, n_bands, {}, {}};
  for (const auto& r : rows) {
    require(r.values.size() == n_channels * n_bands, ErrorKind::LengthMismatch,
            "feature vector has " + std::to_string(r.values.size()) + " values, expected " +
                std::to_string(n_channels * n_bands));
    ds.add(r.values, to_binary(r.label));
  }
  return ds;
}

inline Tensor spectral_input_tensor(const std::vector<FeatureVector>& rows, std::size_t n_channels,
                                    std::size_t n_bands = 5) {
  const auto ds = spectral_input_adapter(rows, n_channels, n_bands);
  const auto idx = iota_indices(ds.size());
  return ds.batch(idx);
}

inline EEGDataset raw_dataset(const std::vector<LabeledEpoch>& epochs) {
  require(!epochs.empty(), ErrorKind::EmptyDataset, "no epochs");
  EEGDataset ds{epochs.front().data.rows(), epochs.front().data.cols(), {}, {}};
  ds.x.reserve(epochs.size() * ds.sample_size());
  for (const auto& e : epochs) ds.add(e.data.data(), to_binary(e.label));
  return ds;
}

}  // namespace drivattn
