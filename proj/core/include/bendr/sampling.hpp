#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "bendr/recording.hpp"
#include "bendr/rng.hpp"

namespace bendr {

enum class SamplerKind { None, WeightedRandom, Smote };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::WeightedRandom;
  std::size_t smote_k = 5;
};

void to_json(nlohmann::json& j, const SamplerSpec& s);
void from_json(const nlohmann::json& j, SamplerSpec& s);
SamplerKind parse_sampler_kind(const std::string& s);
std::string to_string(SamplerKind k);

// Draws indices with replacement, each with weight 1/count(label), so both
// classes are expected equally often.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<int>& labels);

  std::size_t next(Rng& rng) const;
  std::vector<std::size_t> draw(std::size_t n, Rng& rng) const;
  double weight(std::size_t i) const { return weights_[i]; }

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

std::vector<int> labels_of(const WindowedDataset& ds);

struct SmoteSample {
  std::size_t base = 0;      // index into the minority set
  std::size_t neighbor = 0;  // index into the minority set
  double u = 0.0;
  std::vector<double> values;
};

// k nearest minority neighbours (Euclidean, excluding self) per point.
std::vector<std::vector<std::size_t>> nearest_neighbors(const std::vector<std::vector<double>>& points,
                                                        std::size_t k);

// `count` synthetic points x + u·(neighbour − x), u ~ U(0,1).
std::vector<SmoteSample> smote_vectors(const std::vector<std::vector<double>>& minority,
                                       std::size_t k, std::size_t count, Rng& rng);

// Adds synthetic minority windows until both classes have the same count.
// Throws SamplerError when fewer than k+1 minority windows exist.
WindowedDataset smote(const WindowedDataset& ds, std::size_t k, Rng& rng);

// Index stream for one epoch of `epoch_len` draws over `ds` under `kind`
// (None and Smote shuffle without replacement, WeightedRandom draws with it).
std::vector<std::size_t> epoch_order(const WindowedDataset& ds, SamplerKind kind, Rng& rng);

}  // namespace bendr
