#pragma once

#include <cstddef>
#include <cstdint>

#include "bendr/dataset.hpp"
#include "bendr/model_config.hpp"
#include "bendr/synthgen.hpp"

namespace bendr::testing {

// Short records with one seizure each; 4 s windows keep the conv stage cheap.
CorpusSpec small_corpus_spec(std::size_t subjects, std::size_t records, std::uint64_t seed);
PreprocessOptions small_preprocess();
Corpus small_corpus(std::size_t subjects, std::size_t records, std::uint64_t seed);

// 20-channel, 6-block model at width `dim` with `layers` transformer layers.
ModelConfig small_model(std::size_t dim = 16, std::size_t layers = 2);

// Dataset of `n` tiny 2×8 windows with `positives` labelled 1; values are
// drawn around a class-dependent offset.
WindowedDataset labelled_toy(std::size_t n, std::size_t positives, std::uint64_t seed);

}  // namespace bendr::testing
