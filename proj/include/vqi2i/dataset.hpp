#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqi2i/rng.hpp"
#include "vqi2i/tensor.hpp"

namespace vqi2i {

// Sorted (lexicographic) list of *.png paths directly inside `dir`.
std::vector<std::string> list_pngs(const std::string& dir);

// Decodes every PNG in the directory, nearest-neighbour resizes to
// image_size x image_size, and scales to [-1, 1]. Unreadable or non-RGB
// files raise errors naming the file.
std::vector<Tensor> load_image_dir(const std::string& dir, int image_size);

// Deterministic Fisher-Yates shuffle of [0, n) keyed by (seed, tag, epoch).
std::vector<size_t> epoch_order(size_t n, uint64_t seed, const std::string& tag, int64_t epoch);

// Synthesizes `count` paired toy images per domain: the shape layout stream
// is shared between domains (content is domain-invariant by construction),
// only the palettes differ. Domain X is cool (blue-dominant), domain Y warm
// (red-dominant). Same seed -> byte-identical corpus.
void make_toy_corpus(const std::string& dir_x, const std::string& dir_y, int count,
                     int image_size, uint64_t seed);

// Mean over pixels of (R - B) in [-1, 1] units; separates the toy domains.
double red_blue_gap(const Tensor& image);

}  // namespace vqi2i
