#include "bae/verify.hpp"

#include "bae/io_util.hpp"
#include "bae/kernels.hpp"
#include "bae/losses.hpp"
#include "bae/optimizer.hpp"
#include "bae/oracle.hpp"
#include "bae/similarity.hpp"
#include "bae/topk.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <random>

namespace bae {

namespace {

using Index = Eigen::Index;

struct Draw {
  Factors factors;
  MatrixD x;
  VectorD weights;
};

MatrixD gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixD m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

Draw random_draw(std::mt19937_64& rng, bool mixer, Index max_lat = 16, Index max_n = 6) {
  std::uniform_int_distribution<Index> d_in(2, 8), d_lat(2, max_lat), d_mix(1, 8), n(2, max_n);
  Draw d;
  const Index in = d_in(rng), lat = d_lat(rng);
  d.factors.left = gaussian(rng, lat, in, 0.5);
  d.factors.right = gaussian(rng, lat, in, 0.5);
  if (mixer) d.factors.mix = gaussian(rng, d_mix(rng), lat, 0.5);
  d.x = gaussian(rng, n(rng), in);
  d.x.rowwise().normalize();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  d.weights.resize(lat);
  for (Index i = 0; i < lat; ++i) d.weights(i) = u(rng);
  d.weights /= d.weights.sum();
  return d;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-12, std::max(std::abs(a), std::abs(b))); }

double max_rel(const VectorD& a, const VectorD& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a(i), b(i)));
  return worst;
}

CheckResult bound_check(std::string name, double worst, double tol) {
  return {std::move(name), worst <= tol, "worst " + io::fmt(worst) + " (tol " + io::fmt(tol) + ")"};
}

CheckResult check_kernel(std::mt19937_64& rng, std::size_t draws) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Draw d = random_draw(rng, false);
    worst = std::max(worst, (plain_kernel(d.factors).K - oracle::kernel(d.factors)).cwiseAbs().maxCoeff());
  }
  return bound_check("kernel matches materialised B B^T (max abs)", worst, 1e-6);
}

CheckResult check_sse(std::mt19937_64& rng, std::size_t draws, Variant variant) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Draw d = random_draw(rng, has_mixer(variant));
    const MatrixD f = encode(d.factors, d.x).f;
    LossOptions opts;
    opts.block_size = 3;
    VectorD ref;
    if (is_ordered(variant)) {
      opts.prefix_weights = d.weights;
      ref = oracle::sse(d.factors, d.x, d.weights);
    } else {
      ref = oracle::sse(d.factors, d.x);
    }
    worst = std::max(worst, max_rel(sse_for_variant(d.factors, f, variant, opts), ref));
  }
  return bound_check(to_string(variant) + " SSE matches product-space residual (rel)", worst, 1e-5);
}

CheckResult check_mask(std::mt19937_64& rng, std::size_t draws) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Draw d = random_draw(rng, false);
    const OrderedMask m = ordered_mask(static_cast<std::size_t>(d.weights.size()), d.weights);
    worst = std::max(worst, (m.W - oracle::prefix_mask(d.weights)).cwiseAbs().maxCoeff());
  }
  return bound_check("prefix mask matches direct summation (max abs)", worst, 1e-12);
}

CheckResult check_blocked(std::mt19937_64& rng, std::size_t draws) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Draw d = random_draw(rng, false);
    const MatrixD f = encode(d.factors, d.x).f;
    const MatrixD k = oracle::kernel(d.factors);
    const VectorD full = (f * k).cwiseProduct(f).rowwise().sum();
    const DenseKernelTiles tiles(k);
    const auto dim = static_cast<std::size_t>(k.rows());
    for (std::size_t block : {std::size_t{1}, std::size_t{2}, std::max<std::size_t>(1, dim / 2), dim}) {
      worst = std::max(worst, max_rel(blocked_quadratic_form(f, tiles, TileSchedule::make(dim, block)), full));
    }
  }
  return bound_check("blocked quadratic form agrees across tile sizes (rel)", worst, 1e-5);
}

// Smallest |l_j . x| or |r_j . x| over the batch. The density penalty has a
// kink where a latent crosses zero, so central differences are only valid
// when every factor stays well away from it.
double min_factor_activation(const Draw& d) {
  const MatrixD a = d.x * d.factors.left.transpose();
  const MatrixD b = d.x * d.factors.right.transpose();
  return std::min(a.cwiseAbs().minCoeff(), b.cwiseAbs().minCoeff());
}

// The reconstruction losses are low-degree polynomials, so h = 1e-3 is ample.
// The density penalty curves much more sharply and needs a finer step.
CheckResult check_gradient(std::mt19937_64& rng, std::size_t draws, double alpha) {
  const double h = alpha > 0 ? 1e-5 : 1e-3;
  double worst = 0.0;
  const Variant variants[] = {Variant::vanilla, Variant::ordered, Variant::mixed, Variant::combined};
  for (std::size_t i = 0; i < draws; ++i) {
    const Variant v = variants[i % 4];
    Draw d = random_draw(rng, has_mixer(v), alpha > 0 ? 6 : 16, alpha > 0 ? 3 : 6);
    while (alpha > 0 && min_factor_activation(d) < 10 * h) d = random_draw(rng, has_mixer(v), 6, 3);
    const VectorD w = is_ordered(v) ? d.weights : VectorD();
    const LossGradient g = loss_and_gradient(d.factors, d.x, alpha, v, w);
    const auto loss = [&] { return loss_and_gradient(d.factors, d.x, alpha, v, w).loss.total; };
    const auto probe = [&](MatrixD& p, const MatrixD& grad) {
      VectorD fd(p.size()), an(p.size());
      for (Index e = 0; e < p.size(); ++e) {
        const double keep = p.data()[e];
        p.data()[e] = keep + h;
        const double up = loss();
        p.data()[e] = keep - h;
        const double down = loss();
        p.data()[e] = keep;
        fd(e) = (up - down) / (2 * h);
        an(e) = grad.data()[e];
      }
      worst = std::max(worst, (fd - an).norm() / std::max(1e-12, std::max(fd.norm(), an.norm())));
    };
    probe(d.factors.left, g.d_left);
    probe(d.factors.right, g.d_right);
    if (d.factors.mix) probe(*d.factors.mix, *g.d_mix);
  }
  const std::string what = alpha > 0 ? "loss with density penalty" : "reconstruction losses";
  return bound_check("closed-form gradient of " + what + " matches central differences (rel)", worst, 1e-4);
}

CheckResult check_frobenius(std::mt19937_64& rng, std::size_t draws) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    Draw a = random_draw(rng, false);
    Factors b;
    b.left = gaussian(rng, a.factors.left.rows() + 1, a.factors.left.cols(), 0.5);
    b.right = gaussian(rng, b.left.rows(), b.left.cols(), 0.5);
    worst = std::max(worst, rel_err(frobenius_similarity(a.factors, b), oracle::frobenius_similarity(a.factors, b)));
  }
  return bound_check("Frobenius similarity matches materialised operators (rel)", worst, 1e-9);
}

CheckResult check_product_error(std::mt19937_64& rng, std::size_t draws) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    std::uniform_int_distribution<Index> dim(2, 8);
    const Index d = dim(rng);
    VectorD x = gaussian(rng, d, 1);
    x.normalize();
    const VectorD y = gaussian(rng, d, 1, 0.5);
    worst = std::max(worst, rel_err(quadratic_error((x - y).squaredNorm(), y.norm()), oracle::product_error(x, y)));
  }
  return bound_check("TopK product-space error matches materialisation (rel)", worst, 1e-9);
}

CheckResult check_hoyer(std::mt19937_64& rng, std::size_t draws) {
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const VectorD v = gaussian(rng, 2 + static_cast<Index>(i % 30), 1);
    worst = std::max(worst, std::abs(hoyer_density(v) - oracle::hoyer(v)));
  }
  return bound_check("Hoyer density matches definition (abs)", worst, 1e-12);
}

CheckResult check_orthogonalize(std::mt19937_64& rng, std::size_t draws) {
  double lo = 1.0, hi = 1.0;
  std::uniform_int_distribution<Index> dim(1, 8);
  for (std::size_t i = 0; i < draws; ++i) {
    const MatrixD g = gaussian(rng, dim(rng), dim(rng));
    const VectorD s = Eigen::JacobiSVD<MatrixD>(orthogonalize(g)).singularValues();
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
  }
  return {"orthogonalized singular values within [0.7, 1.3]", lo >= 0.7 && hi <= 1.3,
          "range [" + io::fmt(lo) + ", " + io::fmt(hi) + "]"};
}

}  // namespace

std::vector<CheckResult> run_verify(std::uint64_t seed, std::size_t draws) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  out.push_back(check_kernel(rng, draws));
  for (Variant v : {Variant::vanilla, Variant::ordered, Variant::mixed, Variant::combined}) {
    out.push_back(check_sse(rng, draws, v));
  }
  out.push_back(check_mask(rng, draws));
  out.push_back(check_blocked(rng, draws));
  out.push_back(check_gradient(rng, std::max<std::size_t>(4, draws / 5), 0.0));
  out.push_back(check_gradient(rng, std::max<std::size_t>(4, draws / 5), 0.1));
  out.push_back(check_frobenius(rng, draws));
  out.push_back(check_product_error(rng, draws));
  out.push_back(check_hoyer(rng, draws));
  out.push_back(check_orthogonalize(rng, draws));
  return out;
}

}  // namespace bae
