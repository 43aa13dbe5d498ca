#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "tfc/errors.hpp"
#include "tfc/losses.hpp"

using namespace tfc;
using namespace tfc::loss;
using tfc::testing::check_gradients;
using tfc::testing::random_array;

namespace {

using Rows = std::vector<std::vector<double>>;

double cos_sim(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Per-anchor NT-Xent by direct evaluation.
std::vector<double> ref_nt_xent(const Rows& a, const Rows& p, double tau, bool include_pos) {
  const std::size_t b = a.size();
  Rows all = a;
  all.insert(all.end(), p.begin(), p.end());
  std::vector<double> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double num = std::exp(cos_sim(a[i], p[i]) / tau);
    double den = 0.0;
    for (std::size_t j = 0; j < 2 * b; ++j) {
      if (j == i) continue;
      if (!include_pos && j == b + i) continue;
      den += std::exp(cos_sim(a[i], all[j]) / tau);
    }
    out[i] = -std::log(num / den);
  }
  return out;
}

NumArray to_array(const Rows& r) {
  std::vector<double> v;
  for (const auto& row : r) v.insert(v.end(), row.begin(), row.end());
  return NumArray({r.size(), r[0].size()}, v);
}

Rows random_rows(std::size_t b, std::size_t d, SeededRng& rng) {
  Rows r(b, std::vector<double>(d));
  for (auto& row : r)
    for (auto& v : row) v = rng.normal();
  return r;
}

double value(const ad::Var& v) { return v->value[0]; }

BatchEmbeddings constant_batch(const NumArray& t, const NumArray& ta, const NumArray& f,
                               const NumArray& fa) {
  BatchEmbeddings b;
  b.h_t = b.z_t = ad::constant(t);
  b.h_t_aug = b.z_t_aug = ad::constant(ta);
  b.h_f = b.z_f = ad::constant(f);
  b.h_f_aug = b.z_f_aug = ad::constant(fa);
  return b;
}

}  // namespace

TEST_CASE("nt-xent two-sample example") {
  const NumArray a({2, 2}, {1, 0, 0, 1});
  const double expected = -std::log(std::exp(5.0) / (std::exp(5.0) + 2.0));
  CHECK(std::abs(value(nt_xent(ad::constant(a), ad::constant(a), 0.2)) - expected) < 1e-12);
  CHECK(std::abs(expected - 0.0134) < 1e-4);
}

TEST_CASE("nt-xent with every embedding identical is log 3") {
  const NumArray a({2, 3}, {1, 2, 3, 1, 2, 3});
  CHECK(std::abs(value(nt_xent(ad::constant(a), ad::constant(a), 0.2)) - std::log(3.0)) < 1e-12);
  const auto per = nt_xent_per_sample(ad::constant(a), ad::constant(a), 0.2);
  for (double v : per->value.data()) CHECK(std::abs(v - std::log(3.0)) < 1e-12);
}

TEST_CASE("nt-xent matches direct evaluation") {
  SeededRng rng(1);
  for (bool include : {true, false}) {
    for (int t = 0; t < 20; ++t) {
      const Rows a = random_rows(5, 4, rng), p = random_rows(5, 4, rng);
      const auto ref = ref_nt_xent(a, p, 0.3, include);
      const auto got = nt_xent_per_sample(ad::constant(to_array(a)), ad::constant(to_array(p)), 0.3,
                                          include);
      double mean = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(got->value[i] - ref[i]) < 1e-12);
        mean += ref[i] / 5.0;
      }
      CHECK(std::abs(value(nt_xent(ad::constant(to_array(a)), ad::constant(to_array(p)), 0.3,
                                   include)) -
                     mean) < 1e-12);
      CHECK(std::abs(value(nt_xent(ad::constant(to_array(a)), ad::constant(to_array(p)), 0.3,
                                   include, Reduction::sum)) -
                     5.0 * mean) < 1e-10);
    }
  }
}

TEST_CASE("nt-xent is scale invariant and symmetric variant is symmetric") {
  SeededRng rng(2);
  const NumArray a = random_array({4, 6}, rng), p = random_array({4, 6}, rng);
  NumArray a3 = a;
  for (auto& v : a3.data()) v *= 3.7;
  CHECK(std::abs(value(nt_xent(ad::constant(a), ad::constant(p), 0.2)) -
                 value(nt_xent(ad::constant(a3), ad::constant(p), 0.2))) < 1e-12);
  CHECK(std::abs(value(nt_xent_symmetric(ad::constant(a), ad::constant(p), 0.2)) -
                 value(nt_xent_symmetric(ad::constant(p), ad::constant(a), 0.2))) < 1e-12);
}

TEST_CASE("nt-xent contract errors") {
  CHECK_THROWS_AS(nt_xent(ad::constant(NumArray({1, 3}, 1.0)), ad::constant(NumArray({1, 3}, 1.0)), 0.2),
                  ContractError);
  const NumArray z({2, 2}, {0, 0, 1, 1});
  CHECK_THROWS_AS(nt_xent(ad::constant(z), ad::constant(NumArray({2, 2}, 1.0)), 0.2),
                  DegenerateInputError);
  CHECK_THROWS_AS(nt_xent(ad::constant(NumArray({2, 2}, 1.0)), ad::constant(NumArray({2, 3}, 1.0)), 0.2),
                  ShapeError);
}

TEST_CASE("nt-xent decreases after a gradient step on the positives") {
  SeededRng rng(3);
  ad::ParamStore s;
  s.add("a", random_array({4, 5}, rng));
  s.add("p", random_array({4, 5}, rng));
  auto f = [&] { return nt_xent(ad::parameter(s.at("a")), ad::parameter(s.at("p")), 0.2); };
  const double before = value(f());
  s.zero_grads();
  ad::backward(f());
  for (std::size_t i = 0; i < s.at("p").value.size(); ++i) {
    s.at("p").value[i] -= 0.01 * s.at("p").grad[i];
  }
  CHECK(value(f()) < before);
}

TEST_CASE("consistency with all embeddings equal is 3 delta") {
  const NumArray e({3, 2}, {1, 2, 1, 2, 1, 2});
  LossConfig cfg;
  CHECK(std::abs(value(consistency_loss(constant_batch(e, e, e, e), cfg)) - 3.0) < 1e-12);
  cfg.hinge_consistency = true;
  CHECK(std::abs(value(consistency_loss(constant_batch(e, e, e, e), cfg)) - 3.0) < 1e-12);
  cfg.delta = 0.25;
  CHECK(std::abs(value(consistency_loss(constant_batch(e, e, e, e), cfg)) - 0.75) < 1e-12);
}

TEST_CASE("consistency matches direct evaluation") {
  SeededRng rng(4);
  for (bool hinge : {false, true}) {
    LossConfig cfg;
    cfg.hinge_consistency = hinge;
    cfg.delta = 0.5;
    const Rows t = random_rows(4, 3, rng), ta = random_rows(4, 3, rng);
    const Rows f = random_rows(4, 3, rng), fa = random_rows(4, 3, rng);
    const auto s_tf = ref_nt_xent(t, f, cfg.tau, true);
    const auto s_tfa = ref_nt_xent(t, fa, cfg.tau, true);
    const auto s_taf = ref_nt_xent(ta, f, cfg.tau, true);
    const auto s_tafa = ref_nt_xent(ta, fa, cfg.tau, true);
    double expected = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      for (double s : {s_tfa[i], s_taf[i], s_tafa[i]}) {
        const double term = s_tf[i] - s + cfg.delta;
        expected += (hinge ? std::max(0.0, term) : term) / 4.0;
      }
    }
    const auto batch = constant_batch(to_array(t), to_array(ta), to_array(f), to_array(fa));
    CHECK(std::abs(value(consistency_loss(batch, cfg)) - expected) < 1e-12);
  }
}

TEST_CASE("orthogonal augmented frequency view gives a term below delta") {
  // z_t == z_f for every sample, while each z_f_aug is orthogonal to z_t.
  const NumArray t({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0});
  const NumArray fa({2, 4}, {0, 0, 1, 0, 0, 0, 0, 1});
  const auto s_tf = nt_xent_per_sample(ad::constant(t), ad::constant(t), 0.2);
  const auto s_tfa = nt_xent_per_sample(ad::constant(t), ad::constant(fa), 0.2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(s_tf->value[i] < s_tfa->value[i]);
    CHECK(s_tf->value[i] - s_tfa->value[i] + 1.0 < 1.0);
  }
}

TEST_CASE("weighted total arithmetic and endpoints") {
  auto c = [](double v) { return ad::constant(NumArray({1}, v)); };
  CHECK(std::abs(value(weighted_total(c(2), c(2), c(3), 0.5)) - 3.5) < 1e-12);
  CHECK(std::abs(value(weighted_total(c(2), c(2), c(3), 1.0)) - 4.0) < 1e-12);
  CHECK(std::abs(value(weighted_total(c(2), c(2), c(3), 0.0)) - 3.0) < 1e-12);

  SeededRng rng(5);
  const auto batch = constant_batch(random_array({3, 4}, rng), random_array({3, 4}, rng),
                                    random_array({3, 4}, rng), random_array({3, 4}, rng));
  LossConfig cfg;
  cfg.lambda = 1.0;
  const LossTerms one = total_pretrain_loss(batch, cfg);
  CHECK(!one.consistency);
  CHECK(value(one.total) == doctest::Approx(value(one.time) + value(one.freq)).epsilon(1e-12));
  cfg.lambda = 0.0;
  const LossTerms zero = total_pretrain_loss(batch, cfg);
  CHECK(value(zero.total) == doctest::Approx(value(zero.consistency)).epsilon(1e-12));
  cfg.lambda = 0.3;
  const LossTerms mid = total_pretrain_loss(batch, cfg);
  CHECK(value(mid.total) ==
        doctest::Approx(0.3 * value(one.total) + 0.7 * value(zero.total)).epsilon(1e-12));
}

TEST_CASE("ablation variants pick the right terms") {
  SeededRng rng(6);
  const NumArray t = random_array({3, 4}, rng), ta = random_array({3, 4}, rng);
  const NumArray f = random_array({3, 4}, rng), fa = random_array({3, 4}, rng);
  const auto batch = constant_batch(t, ta, f, fa);
  LossConfig cfg;
  cfg.consistency = ConsistencyVariant::tt_c;
  CHECK(value(total_pretrain_loss(batch, cfg).consistency) ==
        doctest::Approx(value(nt_xent(ad::constant(t), ad::constant(ta), 0.2))).epsilon(1e-12));
  cfg.consistency = ConsistencyVariant::ff_c;
  CHECK(value(total_pretrain_loss(batch, cfg).consistency) ==
        doctest::Approx(value(nt_xent(ad::constant(f), ad::constant(fa), 0.2))).epsilon(1e-12));
  cfg.consistency = ConsistencyVariant::none;
  cfg.use_time_loss = false;
  const LossTerms only_f = total_pretrain_loss(batch, cfg);
  CHECK(!only_f.time);
  CHECK(!only_f.consistency);
  cfg.use_freq_loss = false;
  CHECK_THROWS_AS(total_pretrain_loss(batch, cfg), ConfigError);
}

TEST_CASE("cross-entropy values") {
  const std::vector<int> zero{0};
  CHECK(std::abs(value(cross_entropy(ad::constant(NumArray({1, 2}, {1, 0})), zero)) -
                 std::log(1.0 + std::exp(-1.0))) < 1e-12);
  CHECK(std::abs(value(cross_entropy(ad::constant(NumArray({1, 2}, {1, 0})), zero)) - 0.3133) < 1e-4);
  CHECK(std::abs(value(cross_entropy(ad::constant(NumArray({2, 2}, 0.5)), std::vector<int>{0, 1})) -
                 std::log(2.0)) < 1e-12);
  CHECK(value(cross_entropy(ad::constant(NumArray({1, 2}, {500, 0})), zero)) < 1e-12);
  CHECK_THROWS_AS(cross_entropy(ad::constant(NumArray({1, 2})), std::vector<int>{2}), ContractError);
  CHECK_THROWS_AS(cross_entropy(ad::constant(NumArray({1, 2})), std::vector<int>{-1}), ContractError);
}

TEST_CASE("loss gradients match central differences") {
  SeededRng rng(7);
  ad::ParamStore s;
  for (const char* n : {"t", "ta", "f", "fa"}) s.add(n, random_array({4, 5}, rng));
  auto p = [&](const char* n) { return ad::parameter(s.at(n)); };
  auto batch = [&] {
    BatchEmbeddings b;
    b.h_t = b.z_t = p("t");
    b.h_t_aug = b.z_t_aug = p("ta");
    b.h_f = b.z_f = p("f");
    b.h_f_aug = b.z_f_aug = p("fa");
    return b;
  };
  LossConfig cfg;
  CHECK(check_gradients(s, [&] { return nt_xent(p("t"), p("ta"), 0.2); }, 10, rng).max_rel_error < 1e-4);
  CHECK(check_gradients(s, [&] { return nt_xent(p("t"), p("ta"), 0.2, false); }, 10, rng).max_rel_error <
        1e-4);
  CHECK(check_gradients(s, [&] { return consistency_loss(batch(), cfg); }, 10, rng).max_rel_error < 1e-4);
  CHECK(check_gradients(s, [&] { return total_pretrain_loss(batch(), cfg).total; }, 10, rng)
            .max_rel_error < 1e-4);
  ad::ParamStore logits;
  logits.add("z", random_array({5, 3}, rng));
  const std::vector<int> y{0, 2, 1, 1, 0};
  CHECK(check_gradients(logits, [&] { return cross_entropy(ad::parameter(logits.at("z")), y); }, 15, rng)
            .max_rel_error < 1e-4);
}
