#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cqg {

// Bijection of {0, ..., N-1}: the permutation sends a to image(a).
// Text and JSON use one-based images, e.g. [2, 1, 3] swaps the first two.
class Permutation {
 public:
  Permutation() = default;
  // Throws PreconditionError unless `image` is a bijection of 0..N-1.
  explicit Permutation(std::vector<std::size_t> image);
  static Permutation identity(std::size_t n);
  static Permutation from_one_based(const std::vector<std::int64_t>& image);
  // (a b), zero-based.
  static Permutation transposition(std::size_t n, std::size_t a, std::size_t b);
  // Uniform random permutation from a 64-bit seed (own Fisher-Yates on
  // splitmix64, so the result does not depend on the standard library).
  static Permutation random(std::size_t n, std::uint64_t seed);

  std::size_t size() const noexcept { return image_.size(); }
  std::size_t operator()(std::size_t a) const { return image_.at(a); }
  const std::vector<std::size_t>& image() const noexcept { return image_; }
  std::vector<std::int64_t> one_based() const;
  std::string str() const;

  // (p * q)(a) = p(q(a))
  Permutation operator*(const Permutation& q) const;
  Permutation inverse() const;
  bool is_identity() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::size_t> image_;
};

struct ParityInfo {
  std::size_t inversions = 0;  // = number of adjacent transpositions below
  int sign = 1;                // (-1)^k_p
  // Adjacent transpositions (i, i+1), zero-based, whose product in order
  // t_1 t_2 ... t_k equals the permutation.
  std::vector<std::pair<std::size_t, std::size_t>> decomposition;
};

ParityInfo parity(const Permutation& p);
int sign(const Permutation& p);

// All N! permutations in lexicographic order of their images.
std::vector<Permutation> all_permutations(std::size_t n);

// splitmix64 step; the generator used for every randomized check.
std::uint64_t splitmix64(std::uint64_t& state);
// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::uint64_t& state);
// Uniform integer in [0, n) (rejection sampling, unbiased).
std::uint64_t uniform_below(std::uint64_t& state, std::uint64_t n);

}  // namespace cqg
