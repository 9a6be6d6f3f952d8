#include "cqg/spin.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string_view>

#include "cqg/error.hpp"

namespace cqg {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double pole_eps = 1e-12;

std::int64_t parse_int(std::string_view t, const std::string& whole) {
  std::int64_t v = 0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) throw ConfigError("spin: cannot parse '" + whole + "'");
  return v;
}

}  // namespace

std::string SpinValue::str() const {
  if (two_s % 2 == 0) return std::to_string(two_s / 2);
  return std::to_string(two_s) + "/2";
}

SpinValue validate_spin(std::int64_t num, std::int64_t den) {
  if (den == 0) throw PreconditionError("spin: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  std::ostringstream os;
  os << num;
  if (den != 1) os << "/" << den;
  if (num < 0) throw QuantizationError("spin " + os.str() + " is negative");
  if (den != 1 && den != 2)
    throw QuantizationError("spin " + os.str() + " is neither an integer nor a half-integer");
  const std::int64_t two_s = den == 1 ? 2 * num : num;
  if (two_s > std::numeric_limits<int>::max()) throw QuantizationError("spin " + os.str() + " is too large");
  return SpinValue{static_cast<int>(two_s)};
}

SpinValue validate_spin(const std::string& text) {
  std::string_view t = text;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
  if (const auto slash = t.find('/'); slash != std::string_view::npos)
    return validate_spin(parse_int(t.substr(0, slash), text), parse_int(t.substr(slash + 1), text));
  if (const auto dot = t.find('.'); dot != std::string_view::npos) {
    const std::string_view ip = t.substr(0, dot), fp = t.substr(dot + 1);
    if (fp.size() > 15) throw ConfigError("spin: too many decimals in '" + text + "'");
    std::int64_t den = 1;
    for (std::size_t k = 0; k < fp.size(); ++k) den *= 10;
    const bool neg = !ip.empty() && ip.front() == '-';
    const std::int64_t whole = (ip.empty() || ip == "-" || ip == "+") ? 0 : parse_int(ip, text);
    const std::int64_t frac = fp.empty() ? 0 : parse_int(fp, text);
    if (!fp.empty() && (fp.front() == '-' || fp.front() == '+')) throw ConfigError("spin: cannot parse '" + text + "'");
    const std::int64_t mag = (whole < 0 ? -whole : whole) * den + frac;
    return validate_spin(neg ? -mag : mag, den);
  }
  return validate_spin(parse_int(t, text), 1);
}

void check_config(const SpinConfig& cfg, SpinValue s) {
  if (!(cfg.mass > 0.0) || !(cfg.lambda > 0.0) || !(cfg.hbar > 0.0))
    throw PreconditionError("spin config: mass, lambda and hbar must be positive");
  if (!(cfg.alpha >= 0.0 && cfg.alpha < two_pi)) throw PreconditionError("spin config: alpha outside [0, 2 pi)");
  if (!(cfg.beta >= 0.0 && cfg.beta <= std::numbers::pi)) throw PreconditionError("spin config: beta outside [0, pi]");
  if (!(cfg.gamma >= 0.0 && cfg.gamma < two_pi)) throw PreconditionError("spin config: gamma outside [0, 2 pi)");
  const double bound = cfg.hbar * s.s();
  if (!(std::abs(cfg.sz) <= bound * (1.0 + 1e-12)))
    throw PreconditionError("spin config: |s_z| exceeds hbar s");
}

std::vector<double> top_metric(double beta, double mass, double lambda) {
  const double i = mass * lambda * lambda, c = std::cos(beta);
  return {i, 0.0, i * c, 0.0, i, 0.0, i * c, 0.0, i};
}

double gamma_rate(const SpinConfig& cfg, SpinValue s) {
  check_config(cfg, s);
  const double szeta = s.helicity(cfg.hbar);
  const double inertia = cfg.mass * cfg.lambda * cfg.lambda;
  const bool north = cfg.beta < pole_eps;
  const bool south = std::numbers::pi - cfg.beta < pole_eps;
  if (north || south) {
    // Numerator at the pole: s_zeta - s_z (north) or s_zeta + s_z (south).
    const double num = north ? szeta - cfg.sz : szeta + cfg.sz;
    std::ostringstream os;
    os << "gamma_rate: pole at beta = " << (north ? "0" : "pi") << " (s_z = " << cfg.sz << ")";
    if (std::abs(num) <= pole_eps * std::max(1.0, szeta))
      throw PoleError(os.str() + ", finite limit", PoleError::Kind::finite, szeta / (2.0 * inertia));
    throw PoleError(os.str() + ", divergent", PoleError::Kind::divergent, std::numeric_limits<double>::infinity());
  }
  const double sb = std::sin(cfg.beta);
  return (szeta - cfg.sz * std::cos(cfg.beta)) / (inertia * sb * sb);
}

std::vector<RatchetSample> ratchet_grid(SpinValue s, std::size_t nz, std::size_t nb, double hbar) {
  if (nz < 2 || nb < 1) throw PreconditionError("ratchet_grid: need nz >= 2 and nb >= 1");
  std::vector<RatchetSample> out;
  out.reserve(nz * nb);
  const double top = hbar * s.s();
  for (std::size_t i = 0; i < nz; ++i) {
    double sz = top * (2.0 * static_cast<double>(i) / static_cast<double>(nz - 1) - 1.0);
    if (i == nz - 1) sz = top;
    for (std::size_t j = 0; j < nb; ++j)
      out.push_back({sz, std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(nb)});
  }
  return out;
}

RatchetReport ratchet_check(std::span<const RatchetSample> samples, SpinValue s, const SpinConfig& base, Exec exec) {
  RatchetReport rep;
  rep.count = samples.size();
  if (samples.empty()) return rep;
  std::vector<double> rates(samples.size());
  auto eval = [&](std::size_t k) {
    SpinConfig c = base;
    c.sz = samples[k].sz;
    c.beta = samples[k].beta;
    try {
      rates[k] = gamma_rate(c, s);
    } catch (const PoleError& e) {
      throw PreconditionError(std::string("ratchet_check: sample ") + std::to_string(k) + " on a pole: " + e.what());
    }
  };
  if (exec == Exec::serial) {
    for (std::size_t k = 0; k < samples.size(); ++k) eval(k);
  } else {
    std::exception_ptr failure;
    const auto n = static_cast<std::int64_t>(samples.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
      try {
        eval(static_cast<std::size_t>(k));
      } catch (...) {
#pragma omp critical(cqg_ratchet_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  rep.min_rate = rates[0];
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (rates[k] < 0.0 || std::isnan(rates[k])) ++rep.violations;
    if (rates[k] < rep.min_rate) {
      rep.min_rate = rates[k];
      rep.argmin = k;
    }
  }
  rep.at_min = samples[rep.argmin];
  if (rep.violations > 0) {
    std::ostringstream os;
    os << "ratchet_check: " << rep.violations << " negative rate(s), minimum " << rep.min_rate << " at s_z = "
       << rep.at_min.sz << ", beta = " << rep.at_min.beta;
    throw InvariantViolation(os.str());
  }
  return rep;
}

double wigner_small_d(SpinValue s, int two_sigma, double beta) {
  if (two_sigma < -s.two_s || two_sigma > s.two_s || (s.two_s - two_sigma) % 2 != 0)
    throw PreconditionError("wigner_small_d: sigma = " + std::to_string(two_sigma) + "/2 is not in -s..s for s = " +
                            s.str());
  const int up = (s.two_s + two_sigma) / 2;  // s + sigma
  const int down = s.two_s - up;             // s - sigma
  // C(2s, s - sigma), built up multiplicatively.
  double binom = 1.0;
  for (int k = 1; k <= down; ++k) binom = binom * (up + k) / k;
  const double c = std::cos(0.5 * beta), sn = std::sin(0.5 * beta);
  double v = std::sqrt(binom);
  for (int k = 0; k < up; ++k) v *= c;
  for (int k = 0; k < down; ++k) v *= sn;
  return v;
}

std::complex<double> spin_coefficient(SpinValue s, int two_sigma, double alpha, double beta) {
  return std::polar(wigner_small_d(s, two_sigma, beta), 0.5 * two_sigma * alpha);
}

std::complex<double> assemble_single_spin(std::span<const std::complex<double>> components, SpinValue s,
                                          double alpha, double beta, double gamma) {
  if (components.size() != static_cast<std::size_t>(s.multiplicity()))
    throw PreconditionError("assemble_single_spin: expected " + std::to_string(s.multiplicity()) +
                            " components for s = " + s.str());
  std::complex<double> phi{};
  for (int k = 0; k < s.multiplicity(); ++k) {
    const int two_sigma = 2 * k - s.two_s;
    phi += spin_coefficient(s, two_sigma, alpha, beta) * components[static_cast<std::size_t>(k)];
  }
  return std::polar(1.0, s.s() * gamma) * phi;
}

ActionSplit decompose_action(const ScalarField& action, SpinValue s, std::size_t gamma_axis, double hbar) {
  const MetricChart& chart = *action.chart;
  if (gamma_axis >= chart.dim()) throw PreconditionError("decompose_action: gamma axis out of range");
  const Axis& gax = chart.axis(gamma_axis);
  ActionSplit out;
  out.s0 = ScalarField(chart.without_axis(gamma_axis), 0.0);
  const std::size_t stride = chart.stride(gamma_axis), cnt = gax.count;
  const std::size_t outer = chart.size() / (stride * cnt);
  const double k = hbar * s.s();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < stride; ++in) {
      const std::size_t base = o * stride * cnt + in;
      double mean = 0.0;
      for (std::size_t g = 0; g < cnt; ++g) mean += action.values[base + g * stride] - k * gax.coord(g);
      mean /= static_cast<double>(cnt);
      for (std::size_t g = 0; g < cnt; ++g)
        out.residual = std::max(out.residual, std::abs(action.values[base + g * stride] - k * gax.coord(g) - mean));
      out.s0.values[o * stride + in] = mean;
    }
  return out;
}

}  // namespace cqg
