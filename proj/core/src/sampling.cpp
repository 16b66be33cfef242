#include "bendr/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "bendr/errors.hpp"

namespace bendr {

void to_json(nlohmann::json& j, const SamplerSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}, {"smote_k", s.smote_k}};
}

void from_json(const nlohmann::json& j, SamplerSpec& s) {
  SamplerSpec d;
  s.kind = j.contains("kind") ? parse_sampler_kind(j.at("kind").get<std::string>()) : d.kind;
  s.smote_k = j.value("smote_k", d.smote_k);
}

SamplerKind parse_sampler_kind(const std::string& s) {
  const std::string k = normalize_label(s);
  if (k == "NONE") return SamplerKind::None;
  if (k == "WEIGHTED" || k == "WEIGHTEDRANDOM" || k == "WEIGHTED_RANDOM") return SamplerKind::WeightedRandom;
  if (k == "SMOTE") return SamplerKind::Smote;
  throw ConfigError("unknown sampler '" + s + "'");
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::None: return "none";
    case SamplerKind::WeightedRandom: return "weighted";
    case SamplerKind::Smote: return "smote";
  }
  return "?";
}

WeightedSampler::WeightedSampler(const std::vector<int>& labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw SamplerError("weighted sampling needs both classes present");
  weights_.reserve(labels.size());
  cumulative_.reserve(labels.size());
  double acc = 0.0;
  for (int y : labels) {
    const double w = 1.0 / static_cast<double>(y == 1 ? pos : neg);
    weights_.push_back(w);
    acc += w;
    cumulative_.push_back(acc);
  }
}

std::size_t WeightedSampler::next(Rng& rng) const {
  const double target = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

std::vector<std::size_t> WeightedSampler::draw(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = next(rng);
  return out;
}

std::vector<int> labels_of(const WindowedDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& w : ds.windows) out.push_back(w.label);
  return out;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(const std::vector<std::vector<double>>& points,
                                                        std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0 || n < k + 1) throw SamplerError("need at least k+1 points for k nearest neighbours");
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < points[i].size(); ++t) {
        const double d = points[i][t] - points[j][t];
        s += d * d;
      }
      dist[i][j] = dist[j][i] = s;
    }
  }
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) idx.push_back(j);
    }
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return dist[i][a] < dist[i][b] || (dist[i][a] == dist[i][b] && a < b);
                      });
    idx.resize(k);
    out[i] = std::move(idx);
  }
  return out;
}

std::vector<SmoteSample> smote_vectors(const std::vector<std::vector<double>>& minority,
                                       std::size_t k, std::size_t count, Rng& rng) {
  if (minority.size() < k + 1) {
    throw SamplerError("SMOTE needs at least k+1 = " + std::to_string(k + 1) +
                       " minority samples, got " + std::to_string(minority.size()));
  }
  const auto knn = nearest_neighbors(minority, k);
  std::vector<SmoteSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    SmoteSample s;
    s.base = static_cast<std::size_t>(rng.below(minority.size()));
    s.neighbor = knn[s.base][static_cast<std::size_t>(rng.below(k))];
    s.u = rng.uniform();
    const auto& x = minority[s.base];
    const auto& y = minority[s.neighbor];
    s.values.resize(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) s.values[t] = x[t] + s.u * (y[t] - x[t]);
    out.push_back(std::move(s));
  }
  return out;
}

WindowedDataset smote(const WindowedDataset& ds, std::size_t k, Rng& rng) {
  const std::size_t pos = ds.positives();
  const std::size_t neg = ds.size() - pos;
  const int minority_label = pos <= neg ? 1 : 0;
  const std::size_t minority_count = std::min(pos, neg);
  const std::size_t needed = std::max(pos, neg) - minority_count;
  if (minority_count < k + 1) {
    throw SamplerError("SMOTE needs at least k+1 = " + std::to_string(k + 1) +
                       " minority windows, got " + std::to_string(minority_count));
  }
  WindowedDataset out = ds;
  if (needed == 0) return out;

  std::vector<std::vector<double>> minority;
  for (const auto& w : ds.windows) {
    if (w.label == minority_label) minority.push_back(w.data.values());
  }
  const Shape shape = {ds.channel_count, ds.samples_per_window};
  auto synthetic = smote_vectors(minority, k, needed, rng);
  for (std::size_t n = 0; n < synthetic.size(); ++n) {
    Window w;
    w.subject_id = "smote";
    w.record_id = "smote";
    w.index = n;
    w.label = minority_label;
    w.data = Tensor(shape, std::move(synthetic[n].values));
    out.windows.push_back(std::move(w));
  }
  return out;
}

std::vector<std::size_t> epoch_order(const WindowedDataset& ds, SamplerKind kind, Rng& rng) {
  if (kind == SamplerKind::WeightedRandom) {
    return WeightedSampler(labels_of(ds)).draw(ds.size(), rng);
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  return order;
}

}  // namespace bendr
