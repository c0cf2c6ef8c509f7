#include "jsmix/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jsmix {

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace {

void check_shapes(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    std::ostringstream msg;
    msg << "beta shapes must be positive, got (" << a << ", " << b << ")";
    throw ValidationError(msg.str());
  }
}

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw InvariantError("incomplete beta continued fraction failed to converge");
}

}  // namespace

double ibeta_reg(double a, double b, double x) {
  check_shapes(a, b);
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double ibeta_reg_inv(double a, double b, double p) {
  check_shapes(a, b);
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // initial guess (Abramowitz-Stegun 26.5.22 for large shapes, tail expansion otherwise)
  double x;
  if (a >= 1.0 && b >= 1.0) {
    const double pp = p < 0.5 ? p : 1.0 - p;
    const double t = std::sqrt(-2.0 * std::log(pp));
    double xg = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
    if (p < 0.5) xg = -xg;
    const double al = (xg * xg - 3.0) / 6.0;
    const double h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
    const double w = xg * std::sqrt(al + h) / h -
                     (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) *
                         (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
    x = a / (a + b * std::exp(2.0 * w));
  } else {
    const double lna = std::log(a / (a + b));
    const double lnb = std::log(b / (a + b));
    const double t = std::exp(a * lna) / a;
    const double u = std::exp(b * lnb) / b;
    const double w = t + u;
    if (p < t / w) {
      x = std::pow(a * w * p, 1.0 / a);
    } else {
      x = 1.0 - std::pow(b * w * (1.0 - p), 1.0 / b);
    }
  }
  x = std::clamp(x, 1e-300, 1.0 - 1e-16);
  const double afac = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double err = ibeta_reg(a, b, x) - p;
    if (err > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double logpdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + afac;
    double next = x - err * std::exp(-logpdf);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // Newton left the bracket
    const double move = std::fabs(next - x);
    x = next;
    if (move < 1e-15 * (x + 1e-300)) break;
  }
  return x;
}

double beta_logpdf(double x, double a, double b) {
  check_shapes(a, b);
  if (!(x > 0.0 && x < 1.0)) return kLogZero;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn(a, b);
}

double beta_cdf(double x, double a, double b) { return ibeta_reg(a, b, x); }

namespace {

void check_support(const BetaSpec& spec) {
  check_shapes(spec.alpha, spec.beta);
  if (!(spec.lower >= 0.0 && spec.upper <= 1.0 && spec.lower < spec.upper)) {
    std::ostringstream msg;
    msg << "invalid support (" << spec.lower << ", " << spec.upper << ")";
    throw ValidationError(msg.str());
  }
}

}  // namespace

double tbeta_logpdf(double x, const BetaSpec& spec) {
  check_support(spec);
  if (!(x > spec.lower && x < spec.upper)) return kLogZero;
  const double mass =
      ibeta_reg(spec.alpha, spec.beta, spec.upper) - ibeta_reg(spec.alpha, spec.beta, spec.lower);
  if (!(mass > 0.0)) throw ValidationError("degenerate truncation: no mass on the support");
  return beta_logpdf(x, spec.alpha, spec.beta) - std::log(mass);
}

double tbeta_sample(const BetaSpec& spec, Rng& rng) {
  check_support(spec);
  const double f_lo = ibeta_reg(spec.alpha, spec.beta, spec.lower);
  const double f_hi = ibeta_reg(spec.alpha, spec.beta, spec.upper);
  if (!(f_hi > f_lo)) throw ValidationError("degenerate truncation: no mass on the support");
  const double u = rng.uniform(f_lo, f_hi);
  double x = ibeta_reg_inv(spec.alpha, spec.beta, u);
  // quantile rounding can land exactly on a bound; nudge inside
  if (x <= spec.lower) x = std::nextafter(spec.lower, 1.0);
  if (x >= spec.upper) x = std::nextafter(spec.upper, 0.0);
  return x;
}

double rbeta_logpdf(double x, const BetaSpec& spec) {
  check_support(spec);
  if (!(x > spec.lower && x < spec.upper)) return kLogZero;
  const double width = spec.upper - spec.lower;
  return beta_logpdf((x - spec.lower) / width, spec.alpha, spec.beta) - std::log(width);
}

double rbeta_sample(const BetaSpec& spec, Rng& rng) {
  check_support(spec);
  const double width = spec.upper - spec.lower;
  double x = spec.lower + width * rng.beta(spec.alpha, spec.beta);
  if (x <= spec.lower) x = std::nextafter(spec.lower, 1.0);
  if (x >= spec.upper) x = std::nextafter(spec.upper, 0.0);
  return x;
}

double constrained_beta_logpdf(double x, const BetaSpec& spec) {
  switch (spec.kind) {
    case BetaKind::Plain: return beta_logpdf(x, spec.alpha, spec.beta);
    case BetaKind::Truncated: return tbeta_logpdf(x, spec);
    case BetaKind::Restricted: return rbeta_logpdf(x, spec);
  }
  throw ValidationError("unknown beta kind");
}

double constrained_beta_sample(const BetaSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case BetaKind::Plain: {
      double x = rng.beta(spec.alpha, spec.beta);
      if (x <= 0.0) x = std::nextafter(0.0, 1.0);
      if (x >= 1.0) x = std::nextafter(1.0, 0.0);
      return x;
    }
    case BetaKind::Truncated: return tbeta_sample(spec, rng);
    case BetaKind::Restricted: return rbeta_sample(spec, rng);
  }
  throw ValidationError("unknown beta kind");
}

std::pair<double, double> entry_prior_params(int t, int n_occasions) {
  if (t < 1 || t > n_occasions) {
    std::ostringstream msg;
    msg << "occasion index " << t << " outside 1.." << n_occasions;
    throw ValidationError(msg.str());
  }
  const double T = n_occasions;
  return {1.0 / T, 2.0 - t / T};
}

OrderedChainSpec OrderedChainSpec::beta_tbeta_pair() {
  OrderedChainSpec chain;
  chain.links.push_back(BetaSpec::plain(1.0, 2.0));
  chain.links.push_back(BetaSpec::truncated(1.0, 1.0, 0.0));
  return chain;
}

OrderedChainSpec OrderedChainSpec::uniform_chain(int n_components) {
  if (n_components < 1) throw ValidationError("chain needs at least one component");
  OrderedChainSpec chain;
  chain.links.push_back(BetaSpec::plain(1.0, 1.0));
  for (int g = 1; g < n_components; ++g) {
    chain.links.push_back(BetaSpec::truncated(1.0, 1.0, 0.0));
  }
  return chain;
}

std::vector<double> ordered_chain_sample(const OrderedChainSpec& chain, Rng& rng) {
  if (chain.links.empty()) throw ValidationError("empty chain");
  std::vector<double> u(chain.links.size());
  for (size_t g = 0; g < chain.links.size(); ++g) {
    BetaSpec link = chain.links[g];
    if (g > 0) link.lower = u[g - 1];  // condition on the previous component
    u[g] = constrained_beta_sample(link, rng);
  }
  return u;
}

double ordered_chain_logpdf(const OrderedChainSpec& chain, std::span<const double> values) {
  if (values.size() != chain.links.size()) {
    throw ValidationError("chain length does not match value count");
  }
  double total = 0.0;
  for (size_t g = 0; g < chain.links.size(); ++g) {
    BetaSpec link = chain.links[g];
    if (g > 0) link.lower = values[g - 1];
    if (g > 0 && !(values[g] > values[g - 1])) return kLogZero;  // ordering violated
    const double ll = constrained_beta_logpdf(values[g], link);
    if (is_log_zero(ll)) return kLogZero;
    total += ll;
  }
  return total;
}

double tbeta_marginal_pdf(double u2, double alpha1, double beta1, double beta2) {
  check_shapes(alpha1, beta1);
  if (!(beta2 > 0.0)) throw ValidationError("beta2 must be positive");
  if (!(beta1 > beta2)) {
    std::ostringstream msg;
    msg << "closed-form marginal needs beta1 > beta2 (got beta1=" << beta1
        << ", beta2=" << beta2 << "): the beta function diverges otherwise";
    throw ValidationError(msg.str());
  }
  if (!(u2 > 0.0 && u2 < 1.0)) return 0.0;
  const double log_ratio = log_beta_fn(alpha1, beta1 - beta2) - log_beta_fn(alpha1, beta1);
  return std::exp(log_ratio) * beta2 * std::pow(1.0 - u2, beta2 - 1.0) *
         ibeta_reg(alpha1, beta1 - beta2, u2);
}

ChainMoments rbeta_chain_moments(const OrderedChainSpec& chain) {
  if (chain.links.empty()) throw ValidationError("empty chain");
  if (chain.links[0].kind != BetaKind::Plain) {
    throw ValidationError("moment recursion needs a plain Beta first link");
  }
  ChainMoments out;
  const double a0 = chain.links[0].alpha;
  const double b0 = chain.links[0].beta;
  double mean = a0 / (a0 + b0);
  double var = a0 * b0 / ((a0 + b0) * (a0 + b0) * (a0 + b0 + 1.0));
  out.mean.push_back(mean);
  out.variance.push_back(var);
  for (size_t g = 1; g < chain.links.size(); ++g) {
    const BetaSpec& link = chain.links[g];
    if (link.kind != BetaKind::Restricted) {
      throw ValidationError("moment recursion applies to restricted links only");
    }
    const double a = link.alpha;
    const double b = link.beta;
    const double s = a + b;
    const double link_var = a * b / (s * s * (s + 1.0));
    const double next_mean = a / s + mean * b / s;
    const double next_var =
        var * (b / s) * (b / s) * (1.0 + a / (b * (s + 1.0))) +
        (1.0 - mean) * (1.0 - mean) * link_var;
    mean = next_mean;
    var = next_var;
    out.mean.push_back(mean);
    out.variance.push_back(var);
  }
  return out;
}

std::pair<double, double> rbeta_params_from_moments(double prev_mean, double prev_var,
                                                    double target_mean, double target_var) {
  if (!(prev_mean > 0.0 && prev_mean < 1.0) || !(prev_var > 0.0)) {
    throw ValidationError("previous moments out of range");
  }
  if (!(target_mean > prev_mean && target_mean < 1.0)) {
    throw ValidationError("target mean must exceed the previous mean and stay below 1");
  }
  // mean equation pins the shape ratio; variance equation then pins the scale
  const double ratio_b = (1.0 - target_mean) / (1.0 - prev_mean);  // beta / (alpha+beta)
  const double ratio_a = 1.0 - ratio_b;
  const double gap = 1.0 - prev_mean;
  const double base = prev_var * ratio_b * ratio_b;
  const double slope = ratio_a * ratio_b * (prev_var + gap * gap);
  if (!(target_var > base)) {
    throw ValidationError("target variance unreachable: must exceed the propagated floor");
  }
  const double s = slope / (target_var - base) - 1.0;  // alpha + beta
  if (!(s > 0.0)) {
    throw ValidationError("target variance unreachable: implied concentration not positive");
  }
  return {s * ratio_a, s * ratio_b};
}

}  // namespace jsmix
