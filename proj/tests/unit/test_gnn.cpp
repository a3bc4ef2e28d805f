#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "radargest/common/error.hpp"
#include "radargest/gnn/gnn.hpp"
#include "radargest/tensor/gradcheck.hpp"
#include "radargest/tensor/ops.hpp"

using namespace radargest;
using namespace radargest::gnn;
using tensor::Shape;

namespace {

Tensor random_points(std::size_t n, std::size_t f, Rng& rng) {
  Tensor t({n, f});
  for (auto& v : t.storage()) v = rng.uniform(-1, 1);
  return t;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(i, c) = t.at(perm[i], c);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// O(n^2) neighbour oracle with full sort.
std::vector<std::uint32_t> oracle_neighbors(const Tensor& pts, std::size_t i, std::size_t k, std::size_t lo,
                                            std::size_t hi) {
  std::vector<std::pair<double, std::uint32_t>> cand;
  for (std::size_t j = lo; j < hi; ++j) {
    if (j == i) continue;
    double d = 0;
    for (std::size_t c = 0; c < pts.cols(); ++c) d += (pts.at(i, c) - pts.at(j, c)) * (pts.at(i, c) - pts.at(j, c));
    cand.push_back({d, static_cast<std::uint32_t>(j)});
  }
  std::sort(cand.begin(), cand.end());
  std::vector<std::uint32_t> out{static_cast<std::uint32_t>(i)};
  for (std::size_t s = 0; s < k; ++s) out.push_back(cand[s].second);
  return out;
}

}  // namespace

TEST_CASE("knn on collinear points") {
  Tensor pts({4, 1}, std::vector<double>{0, 1, 2, 4});
  const auto g = knn_graph(pts, 2);
  CHECK(g.edges_per_vertex() == 3);
  CHECK(g.neighbor(0, 0) == 0);
  CHECK(g.neighbor(0, 1) == 1);
  CHECK(g.neighbor(0, 2) == 2);
  // Point 1: distances 1 (to 0), 1 (to 2): tie by index.
  CHECK(g.neighbor(1, 1) == 0);
  CHECK(g.neighbor(1, 2) == 2);
  CHECK(g.distances[0 * 3 + 2] == 4.0);
}

TEST_CASE("knn equals the brute-force oracle, self loop first") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t f = 1 + trial % 6;
    const Tensor pts = random_points(64, f, rng);
    for (std::size_t k : {1u, 3u, 10u}) {
      const auto g = knn_graph(pts, k);
      for (std::size_t i = 0; i < 64; ++i) {
        const auto ref = oracle_neighbors(pts, i, k, 0, 64);
        for (std::size_t s = 0; s <= k; ++s) CHECK(g.neighbor(i, s) == ref[s]);
      }
    }
  }
}

TEST_CASE("knn over stacked clouds stays within each cloud") {
  Rng rng(2);
  const Tensor pts = random_points(3 * 16, 5, rng);
  const auto g = knn_graph(pts, 3, 16);
  for (std::size_t i = 0; i < 48; ++i) {
    const std::size_t lo = i / 16 * 16;
    const auto ref = oracle_neighbors(pts, i, 3, lo, lo + 16);
    for (std::size_t s = 0; s <= 3; ++s) CHECK(g.neighbor(i, s) == ref[s]);
  }
}

TEST_CASE("knn with valid counts ignores padding and repeats the vertex when short") {
  Rng rng(3);
  Tensor pts = random_points(8, 2, rng);
  const std::vector<int> valid{3};
  const auto g = knn_graph(pts, 3, 8, &valid);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(g.neighbor(i, 0) == i);
    std::vector<std::uint32_t> others;
    for (std::size_t s = 1; s <= 3; ++s) others.push_back(g.neighbor(i, s));
    // Two valid others, the third slot repeats i.
    CHECK(std::count(others.begin(), others.end(), static_cast<std::uint32_t>(i)) == 1);
    for (auto o : others) CHECK(o < 3);
  }
}

TEST_CASE("knn rejects k >= n") {
  Rng rng(4);
  CHECK_THROWS_AS(knn_graph(random_points(4, 2, rng), 4), Error);
  CHECK_THROWS_AS(knn_graph(random_points(4, 2, rng), 0), Error);
}

TEST_CASE("edge features: projection probe and translation cancellation") {
  Rng rng(5);
  const Tensor pts = random_points(10, 3, rng);
  const auto g = knn_graph(pts, 3);
  EdgeConvSpec spec{"probe", 3, {3}, false};
  ParamStore params;
  Tensor w({6, 3});
  for (int i = 0; i < 3; ++i) w.at(i, i) = 1;
  params.add("probe.l0.W", w);
  params.add("probe.l0.b", Tensor({3}));
  Tape tape;
  const Var e = edge_features(tape, params, spec, tape.constant(pts), g);
  REQUIRE(e.shape() == Shape{10, 4, 3});
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t c = 0; c < 3; ++c) CHECK(e.value()[(i * 4 + s) * 3 + c] == pts.at(i, c));

  // Second-half probe: e_ij = r_j - r_i, zero on the self loop, unchanged by translation.
  Tensor w2({6, 3});
  for (int i = 0; i < 3; ++i) w2.at(3 + i, i) = 1;
  params.get("probe.l0.W") = w2;
  Tensor shifted = pts;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t c = 0; c < 3; ++c) shifted.at(i, c) += 0.7 * (c + 1);
  Tape t2;
  const Var a = edge_features(t2, params, spec, t2.constant(pts), g);
  const Var b = edge_features(t2, params, spec, t2.constant(shifted), g);
  CHECK(max_abs_diff(a.value(), b.value()) < 1e-12);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(a.value()[(i * 4) * 3 + c] == 0.0);
}

TEST_CASE("edge conv equals the literal max over edge features") {
  Rng rng(6);
  for (auto widths : {std::vector<std::size_t>{16}, std::vector<std::size_t>{8, 12}}) {
    EdgeConvSpec spec{"ec", 5, widths};
    ParamStore params;
    init_edge_conv(params, spec, rng);
    const Tensor pts = random_points(64, 5, rng);
    const auto g = knn_graph(pts, 3);
    Tape tape;
    const Var fast = edge_conv(tape, params, spec, tape.constant(pts), g);
    const Var ref = edge_conv_reference(tape, params, spec, tape.constant(pts), g);
    REQUIRE(fast.shape() == Shape{64, spec.out_features()});
    CHECK(max_abs_diff(fast.value(), ref.value()) < 1e-12);

    // Self-loop participates in the max.
    const Var e = edge_features(tape, params, spec, tape.constant(pts), g);
    const std::size_t fo = spec.out_features();
    for (std::size_t i = 0; i < 64; ++i)
      for (std::size_t c = 0; c < fo; ++c) CHECK(fast.value().at(i, c) >= e.value()[(i * 4) * fo + c] - 1e-15);
  }
}

TEST_CASE("edge conv output is n x F' and width 64 on a 64 x 5 cloud") {
  Rng rng(7);
  EdgeConvSpec spec{"ec", 5, {64}};
  ParamStore params;
  init_edge_conv(params, spec, rng);
  CHECK(params.get("ec.l0.W").shape() == Shape{10, 64});
  const Tensor pts = random_points(64, 5, rng);
  Tape tape;
  CHECK(edge_conv(tape, params, spec, tape.constant(pts), knn_graph(pts, 3)).shape() == Shape{64, 64});
  CHECK_THROWS_AS(edge_conv(tape, params, spec, tape.constant(random_points(64, 4, rng)), knn_graph(pts, 3)), Error);
}

TEST_CASE("edge conv of identical edge features is that feature") {
  Rng rng(8);
  EdgeConvSpec spec{"ec", 3, {7}};
  ParamStore params;
  init_edge_conv(params, spec, rng);
  Tensor pts({5, 3}, 0.4);  // all points equal: every edge input is (r, 0)
  Tape tape;
  const auto g = knn_graph(pts, 3);
  const Var out = edge_conv(tape, params, spec, tape.constant(pts), g);
  const Var e = edge_features(tape, params, spec, tape.constant(pts), g);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 7; ++c) CHECK(std::abs(out.value().at(i, c) - e.value()[(i * 4 + 2) * 7 + c]) < 1e-12);
}

TEST_CASE("edge conv is permutation equivariant, pooled output invariant") {
  Rng rng(9);
  EdgeConvSpec spec{"ec", 5, {32}};
  ParamStore params;
  init_edge_conv(params, spec, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor pts = random_points(64, 5, rng);
    std::vector<std::size_t> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    const Tensor permuted = permute_rows(pts, perm);
    Tape tape;
    const Var a = edge_conv(tape, params, spec, tape.constant(pts), knn_graph(pts, 3));
    const Var b = edge_conv(tape, params, spec, tape.constant(permuted), knn_graph(permuted, 3));
    CHECK(max_abs_diff(permute_rows(a.value(), perm), b.value()) < 1e-9);
    CHECK(max_abs_diff(tensor::reduce_max(a, 0).value(), tensor::reduce_max(b, 0).value()) < 1e-9);
  }
}

TEST_CASE("fresh T-net is the identity; Doppler and intensity always pass through") {
  Rng rng(10);
  TNetSpec spec;
  ParamStore params;
  init_tnet(params, spec, rng);
  const Tensor pts = random_points(2 * 64, 5, rng);
  {
    Tape tape;
    const auto out = input_transform(tape, params, spec, tape.constant(pts), 64);
    CHECK(out.points.value() == pts);
    CHECK(out.transform.shape() == Shape{2, 3, 3});
  }
  for (auto& v : params.get("tnet.fc.W").storage()) v = rng.normal(0, 0.3);
  for (auto& v : params.get("tnet.fc.b").storage()) v = rng.normal(0, 0.3);
  Tape tape;
  const auto out = input_transform(tape, params, spec, tape.constant(pts), 64);
  bool moved = false;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    CHECK(out.points.value().at(i, 3) == pts.at(i, 3));
    CHECK(out.points.value().at(i, 4) == pts.at(i, 4));
    moved |= out.points.value().at(i, 0) != pts.at(i, 0);
  }
  CHECK(moved);
  // xyz rows are multiplied by the per-cloud matrix.
  const Tensor& m = out.transform.value();
  for (std::size_t i : {0u, 70u}) {
    const std::size_t c = i / 64;
    for (std::size_t col = 0; col < 3; ++col) {
      double v = 0;
      for (std::size_t r = 0; r < 3; ++r) v += pts.at(i, r) * m[c * 9 + r * 3 + col];
      CHECK(out.points.value().at(i, col) == doctest::Approx(v).epsilon(1e-12));
    }
  }
}

TEST_CASE("T-net gradient passes a finite-difference check") {
  Rng rng(11);
  TNetSpec spec;
  ParamStore params;
  init_tnet(params, spec, rng);
  for (auto& v : params.get("tnet.fc.W").storage()) v = rng.normal(0, 0.1);
  const Tensor pts = random_points(2 * 16, 5, rng);
  Tensor proj({32, 5});
  for (auto& v : proj.storage()) v = rng.normal();
  tensor::LossFn fn = [&](const ParamStore& p, ParamStore* grads) {
    Tape tape;
    const auto out = input_transform(tape, p, spec, tape.constant(pts), 16);
    const Var loss = tensor::reduce_sum(tensor::mul(out.points, tape.constant(proj)));
    if (grads) tape.backward(loss, grads);
    return loss.value().item();
  };
  tensor::GradcheckOptions opts;
  opts.samples = 300;
  CHECK(tensor::finite_diff_check(fn, params, opts).max_rel_error < 1e-4);
}

TEST_CASE("dense layer shapes and init") {
  Rng rng(12);
  ParamStore params;
  init_dense(params, "fc", 4, 3, rng);
  CHECK(params.get("fc.W").shape() == Shape{4, 3});
  CHECK(params.get("fc.b").shape() == Shape{3});
  Tape tape;
  const Var y = dense(tape, params, "fc", tape.constant(random_points(5, 4, rng)));
  CHECK(y.shape() == Shape{5, 3});
  const Tensor w = init_weight(100, 50, rng);
  double maxabs = 0;
  for (double v : w.storage()) maxabs = std::max(maxabs, std::abs(v));
  CHECK(maxabs > 0);
  CHECK(maxabs < 1.0);
}
