#include "cqg/permutation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "cqg/error.hpp"

namespace cqg {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; }

std::uint64_t uniform_below(std::uint64_t& state, std::uint64_t n) {
  if (n == 0) throw PreconditionError("uniform_below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do x = splitmix64(state);
  while (x >= limit);
  return x % n;
}

Permutation::Permutation(std::vector<std::size_t> image) : image_(std::move(image)) {
  std::vector<char> seen(image_.size(), 0);
  for (std::size_t a : image_) {
    if (a >= image_.size() || seen[a]) throw PreconditionError("permutation: not a bijection: " + str());
    seen[a] = 1;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> im(n);
  std::iota(im.begin(), im.end(), std::size_t{0});
  return Permutation(std::move(im));
}

Permutation Permutation::from_one_based(const std::vector<std::int64_t>& image) {
  std::vector<std::size_t> im;
  im.reserve(image.size());
  for (auto v : image) {
    if (v < 1) throw PreconditionError("permutation: one-based image must be >= 1");
    im.push_back(static_cast<std::size_t>(v - 1));
  }
  return Permutation(std::move(im));
}

Permutation Permutation::transposition(std::size_t n, std::size_t a, std::size_t b) {
  if (a >= n || b >= n) throw PreconditionError("transposition: index out of range");
  Permutation p = identity(n);
  std::swap(p.image_[a], p.image_[b]);
  return p;
}

Permutation Permutation::random(std::size_t n, std::uint64_t seed) {
  Permutation p = identity(n);
  std::uint64_t st = seed;
  for (std::size_t i = n; i > 1; --i) std::swap(p.image_[i - 1], p.image_[uniform_below(st, i)]);
  return p;
}

std::vector<std::int64_t> Permutation::one_based() const {
  std::vector<std::int64_t> out;
  for (auto a : image_) out.push_back(static_cast<std::int64_t>(a) + 1);
  return out;
}

std::string Permutation::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < image_.size(); ++k) os << (k ? ", " : "") << image_[k] + 1;
  os << ']';
  return os.str();
}

Permutation Permutation::operator*(const Permutation& q) const {
  if (q.size() != size()) throw PreconditionError("permutation product: size mismatch");
  std::vector<std::size_t> im(size());
  for (std::size_t a = 0; a < size(); ++a) im[a] = image_[q.image_[a]];
  return Permutation(std::move(im));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> im(size());
  for (std::size_t a = 0; a < size(); ++a) im[image_[a]] = a;
  return Permutation(std::move(im));
}

bool Permutation::is_identity() const {
  for (std::size_t a = 0; a < size(); ++a)
    if (image_[a] != a) return false;
  return true;
}

ParityInfo parity(const Permutation& p) {
  ParityInfo info;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (p(i) > p(j)) ++info.inversions;
  info.sign = info.inversions % 2 ? -1 : 1;
  // Bubble-sort the image to the identity. Each swap of positions (i, i+1)
  // is a right multiplication by that transposition, so p t_1 ... t_k = id
  // and p = t_k ... t_1; the list is stored in that reversed order.
  std::vector<std::size_t> im = p.image();
  std::vector<std::pair<std::size_t, std::size_t>> swaps;
  for (std::size_t pass = 0; pass < n; ++pass)
    for (std::size_t i = 0; i + 1 < n - pass; ++i)
      if (im[i] > im[i + 1]) {
        std::swap(im[i], im[i + 1]);
        swaps.emplace_back(i, i + 1);
      }
  info.decomposition.assign(swaps.rbegin(), swaps.rend());
  return info;
}

int sign(const Permutation& p) { return parity(p).sign; }

std::vector<Permutation> all_permutations(std::size_t n) {
  std::vector<Permutation> out;
  std::vector<std::size_t> im(n);
  std::iota(im.begin(), im.end(), std::size_t{0});
  do out.emplace_back(im);
  while (std::next_permutation(im.begin(), im.end()));
  return out;
}

}  // namespace cqg
