#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ntiqa/model.hpp"
#include "ntiqa/rng.hpp"
#include "ntiqa/serialize.hpp"

using namespace ntiqa;

namespace {

Tensor rand_image(uint64_t seed, Shape shape = {3, 32, 32}) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

double rel_vec_err(const Tensor& a, const Tensor& b) {
  double num = 0.0, den = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

}  // namespace

TEST_CASE("init is deterministic and seed-sensitive") {
  ArchSpec spec = ArchSpec::mlp();
  ScorerModel a = ScorerModel::init(spec, 5);
  ScorerModel b = ScorerModel::init(spec, 5);
  ScorerModel c = ScorerModel::init(spec, 6);
  for (const auto& [name, t] : a.params()) {
    CHECK(bitwise_equal(t, b.params().at(name)));
  }
  bool any_diff = false;
  for (const auto& [name, t] : a.params()) {
    if (!bitwise_equal(t, c.params().at(name))) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("MLP parameter shapes on 3x32x32 input") {
  ScorerModel m = ScorerModel::init(ArchSpec::mlp({3, 32, 32}, 32), 1);
  CHECK(m.params().at("fc1.weight").shape() == Shape{32, 3072});
  CHECK(m.params().at("fc1.bias").shape() == Shape{32});
  CHECK(m.params().at("fc2.weight").shape() == Shape{1, 32});
  CHECK(m.params().at("fc2.bias").shape() == Shape{1});
}

TEST_CASE("predict stays in [0,100]") {
  for (auto spec : {ArchSpec::mlp(), ArchSpec::cnn()}) {
    ScorerModel m = ScorerModel::init(spec, 3);
    for (uint64_t s = 0; s < 5; ++s) {
      double score = m.predict(rand_image(s));
      CHECK(score >= 0.0);
      CHECK(score <= 100.0);
    }
  }
}

TEST_CASE("zero parameters score exactly 50") {
  ScorerModel m = ScorerModel::init(ArchSpec::cnn(), 1);
  for (auto& [name, t] : m.params()) t = Tensor(t.shape());
  CHECK(m.predict(rand_image(11)) == 50.0);
}

TEST_CASE("predict rejects wrong shapes") {
  ScorerModel m = ScorerModel::init(ArchSpec::cnn(), 1);
  CHECK_THROWS_WITH_AS(m.predict(Tensor({3, 16, 16})),
                       doctest::Contains("shape"), Error);
}

TEST_CASE("linear probe is an exact dot product") {
  Tensor w({4}, {1, 1, 1, 1});
  ScorerModel probe = ScorerModel::linear_probe(w);
  Tensor x({1, 1, 4}, {1, 2, 3, 4});
  CHECK(probe.predict(x) == 10.0);

  Rng rng(21);
  Tensor wr({16});
  for (int64_t i = 0; i < 16; ++i) wr[i] = rng.uniform(-1, 1);
  ScorerModel pr = ScorerModel::linear_probe(wr);
  Tensor xr({1, 1, 16});
  for (int64_t i = 0; i < 16; ++i) xr[i] = rng.uniform();
  Tensor g = grad_input(pr, xr);
  for (int64_t i = 0; i < 16; ++i) CHECK(g[i] == wr[i]);
  CHECK(l1_norm(g) == l1_norm(wr));
}

TEST_CASE("linear probe realizes the worst-case bound exactly") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor w({24});
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);
    ScorerModel probe = ScorerModel::linear_probe(w);
    Tensor x({1, 1, 24});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    double eps = 0.01;
    Tensor delta = sign(w);
    Tensor shifted = x;
    for (int64_t i = 0; i < x.size(); ++i) shifted[i] += eps * delta[i];
    double change = std::abs(probe.predict(shifted) - probe.predict(x));
    CHECK(change == doctest::Approx(eps * l1_norm(w)).epsilon(1e-12));
  }
}

TEST_CASE("constant scorer has zero input gradient") {
  ScorerModel m = ScorerModel::init(ArchSpec::mlp(), 2);
  for (auto& [name, t] : m.params()) t = Tensor(t.shape());
  Tensor g = grad_input(m, rand_image(3));
  for (int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("grad_input matches finite differences on both scorers") {
  for (auto spec : {ArchSpec::mlp({3, 8, 8}, 8), ArchSpec::cnn({3, 8, 8})}) {
    ScorerModel m = ScorerModel::init(spec, 9);
    Tensor x = rand_image(13, {3, 8, 8});
    Tensor ad = grad_input(m, x);
    Tensor fd = finite_diff_gradient(m, x, 1e-5);
    CHECK(rel_vec_err(ad, fd) < 1e-6);
  }
}

TEST_CASE("finite_diff_gradient exact on linear and quadratic scorers") {
  Tensor w({3}, {2, -1, 0.5});
  ScorerModel probe = ScorerModel::linear_probe(w);
  Tensor x({1, 1, 3}, {0.3, 0.6, 0.9});
  Tensor fd = finite_diff_gradient(probe, x, 0.01);
  for (int64_t i = 0; i < 3; ++i) CHECK(fd[i] == doctest::Approx(w[i]).epsilon(1e-10));
  CHECK_THROWS_AS(finite_diff_gradient(probe, x, 0.0), Error);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  std::string path = temp_path("ntiqa_test_ckpt.bin");
  for (auto spec : {ArchSpec::mlp(), ArchSpec::cnn()}) {
    ScorerModel m = ScorerModel::init(spec, 17);
    save_checkpoint(path, m);
    ScorerModel loaded = load_checkpoint(path);
    CHECK(loaded.spec().kind == m.spec().kind);
    CHECK(loaded.input_shape() == m.input_shape());
    for (const auto& [name, t] : m.params()) {
      CHECK(bitwise_equal(t, loaded.params().at(name)));
    }
    Tensor x = rand_image(23);
    CHECK(m.predict(x) == loaded.predict(x));
  }
  std::filesystem::remove(path);
}

TEST_CASE("probe checkpoint round-trips") {
  std::string path = temp_path("ntiqa_test_probe.bin");
  Rng rng(5);
  Tensor w({3072});
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);
  ScorerModel probe = ScorerModel::linear_probe(w, {3, 32, 32});
  save_checkpoint(path, probe);
  ScorerModel loaded = load_checkpoint(path);
  Tensor x = rand_image(31);
  CHECK(probe.predict(x) == loaded.predict(x));
  std::filesystem::remove(path);
}

TEST_CASE("tensor container format details") {
  std::string path = temp_path("ntiqa_test_fmt.bin");
  Tensor t({2, 2}, {1.5, -2.0, 0.0, 42.0});
  save_tensor(path, "image", t);
  auto bytes = read_file(path);
  REQUIRE(bytes.size() >= 12);
  CHECK(bytes[0] == 'N');
  CHECK(bytes[1] == 'T');
  CHECK(bytes[2] == 'I');
  CHECK(bytes[3] == 'Q');
  CHECK(bytes[4] == 1);  // version 1, little-endian
  CHECK(bytes[8] == 1);  // one tensor
  Tensor back = load_tensor(path, "image");
  CHECK(bitwise_equal(t, back));
  CHECK_THROWS_AS(load_tensor(path, "missing"), Error);
  std::filesystem::remove(path);
}
