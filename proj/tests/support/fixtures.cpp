#include "fixtures.hpp"

#include "bendr/rng.hpp"

namespace bendr::testing {

CorpusSpec small_corpus_spec(std::size_t subjects, std::size_t records, std::uint64_t seed) {
  CorpusSpec s;
  s.subjects = subjects;
  s.records_per_subject = records;
  s.record_s = 64.0;
  s.seizure_min_s = 16.0;
  s.seizure_max_s = 24.0;
  s.seed = seed;
  return s;
}

PreprocessOptions small_preprocess() {
  PreprocessOptions p;
  p.window_s = 4.0;
  return p;
}

Corpus small_corpus(std::size_t subjects, std::size_t records, std::uint64_t seed) {
  return build_corpus(generate_recordings(small_corpus_spec(subjects, records, seed)),
                      small_preprocess());
}

ModelConfig small_model(std::size_t dim, std::size_t layers) {
  ModelConfig c = ModelConfig{}.scaled(dim).with_shape(6, layers);
  c.norm_groups = 4;
  c.pos_groups = 4;
  c.pos_kernel = 5;
  c.dropout_p = 0.1;
  return c;
}

WindowedDataset labelled_toy(std::size_t n, std::size_t positives, std::uint64_t seed) {
  WindowedDataset ds;
  ds.window_s = 1.0;
  ds.channel_count = 2;
  ds.samples_per_window = 8;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Window w;
    w.subject_id = "toy";
    w.record_id = "toy_r01";
    w.index = i;
    w.label = i < positives ? 1 : 0;
    w.data = Tensor({2, 8});
    for (double& v : w.data.values()) v = (w.label ? 3.0 : 0.0) + rng.normal();
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace bendr::testing
