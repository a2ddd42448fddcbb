#pragma once

// Hand-built sessions for model tests.

#include <random>

#include "msdiar/nasf.hpp"

namespace fixture {

using namespace msdiar;

// L base segments over K speakers, every scale has one segment per base
// segment. Scale `planted` holds the exact label cosine d for every pair;
// the other scales hold symmetric uniform noise.
inline nasf::LabelledSession planted_session(std::size_t L, int K, int dim, int scales, int planted,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  nasf::LabelledSession s;
  s.features.id = "planted" + std::to_string(seed);
  s.label_vectors.assign(L, SpeakerLabelVector(static_cast<std::size_t>(K), 0.0));
  for (std::size_t i = 0; i < L; ++i) {
    const int main = std::uniform_int_distribution<int>(0, K - 1)(rng);
    s.label_vectors[i][static_cast<std::size_t>(main)] = 0.5;
    if (u(rng) < 0.2) s.label_vectors[i][static_cast<std::size_t>((main + 1) % K)] = 0.5 * u(rng);
  }
  Eigen::MatrixXd centroids(K, dim);
  for (Eigen::Index k = 0; k < centroids.size(); ++k) centroids.data()[k] = g(rng);
  for (int sc = 0; sc < scales; ++sc) {
    Eigen::MatrixXd e(static_cast<Eigen::Index>(L), dim);
    for (std::size_t i = 0; i < L; ++i) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
      for (int k = 0; k < K; ++k) row += s.label_vectors[i][static_cast<std::size_t>(k)] * centroids.row(k);
      for (int c = 0; c < dim; ++c) row(c) += 0.3 * g(rng);
      e.row(static_cast<Eigen::Index>(i)) = row;
    }
    s.features.embeddings.push_back(e);
    Eigen::MatrixXd c(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = i; j < L; ++j) {
        const double v = i == j ? 1.0 : (sc == planted ? cosine(s.label_vectors[i], s.label_vectors[j]) : u(rng));
        c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    s.features.tensor.scales.push_back(c);
  }
  s.features.map.assign(L, std::vector<std::size_t>(static_cast<std::size_t>(scales)));
  for (std::size_t i = 0; i < L; ++i)
    for (auto& m : s.features.map[i]) m = i;
  return s;
}

// Random batch for gradient checks.
inline nasf::PairBatch random_batch(const nasf::ModelConfig& cfg, Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nasf::PairBatch b;
  for (int s = 0; s < cfg.scales; ++s) {
    Eigen::MatrixXd a(n, cfg.dim), bb(n, cfg.dim);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      a.data()[k] = g(rng);
      bb.data()[k] = g(rng);
    }
    b.a.push_back(a);
    b.b.push_back(bb);
  }
  b.c.resize(n, cfg.scales);
  for (Eigen::Index k = 0; k < b.c.size(); ++k) b.c.data()[k] = u(rng);
  b.d.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) b.d(k) = u(rng);
  return b;
}

// Params with every entry drawn from N(0, scale^2), biases included.
inline nasf::Params random_params(const nasf::ModelConfig& cfg, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, scale);
  auto p = nasf::Params::zeros(cfg);
  for (auto* m : p.tensors())
    for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = g(rng);
  return p;
}

// Largest relative error between backward() and central differences over
// every parameter. The denominator is floored so that entries whose true
// gradient is ~0 are judged on absolute error.
struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

inline GradCheck gradient_check(const nasf::Params& p, const nasf::PairBatch& batch, double step = 1e-5,
                                double floor = 1e-6) {
  const auto analytic = nasf::backward(p, batch).grad;
  auto probe = p;
  GradCheck out;
  auto ptensors = probe.tensors();
  auto gtensors = analytic.tensors();
  for (std::size_t t = 0; t < ptensors.size(); ++t) {
    for (Eigen::Index k = 0; k < ptensors[t]->size(); ++k) {
      double& x = ptensors[t]->data()[k];
      const double keep = x;
      x = keep + step;
      const double up = nasf::loss(nasf::forward(probe, batch).y, batch.d);
      x = keep - step;
      const double down = nasf::loss(nasf::forward(probe, batch).y, batch.d);
      x = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double a = gtensors[t]->data()[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      out.max_rel = std::max(out.max_rel, rel);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace fixture
