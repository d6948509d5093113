#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pmd/distill.hpp"
#include "pmd/model.hpp"

using namespace pmd;

namespace {

ModelDims small_dims() { return ModelDims{6, 3, 4, 2}; }

Batch small_batch() {
  Batch b;
  b.language = 1;
  b.sources = {{0, 3, 5}, {2, 2}};
  b.targets = {{1, 4, 0}, {5, 3}};
  return b;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("init: seeded, bounded, reproducible") {
  ModelParams a = init_params(small_dims(), 99);
  ModelParams b = init_params(small_dims(), 99);
  ModelParams c = init_params(small_dims(), 100);
  CHECK(a.token_embedding.data == b.token_embedding.data);
  CHECK(a.output_bias.data == b.output_bias.data);
  CHECK(a.token_embedding.data != c.token_embedding.data);
  for (const auto& [pid, arr] : param_list(a)) {
    (void)pid;
    for (double v : arr->data) {
      CHECK(v >= -0.1);
      CHECK(v < 0.1);
    }
  }
  CHECK(a.parameter_count() ==
        6 * 3 + 2 * 3 + 3 * 4 + 4 + 4 * 6 + 6);
}

TEST_CASE("dims validation") {
  CHECK_THROWS_AS((ModelDims{1, 3, 4, 2}.validate()), ModelError);
  CHECK_THROWS_AS((ModelDims{6, 1, 4, 2}.validate()), ModelError);
  CHECK_THROWS_AS((ModelDims{6, 3, 1, 2}.validate()), ModelError);
  CHECK_THROWS_AS((ModelDims{6, 3, 4, 0}.validate()), ModelError);
  CHECK_NOTHROW(small_dims().validate());
}

TEST_CASE("batch validation names the bad position") {
  const ModelDims dims = small_dims();
  Batch b = small_batch();
  b.sources[1][1] = 6;  // vocab is 6, ids go to 5
  CHECK_THROWS_WITH_AS(b.validate(dims),
                       "batch: token id 6 out of range at sentence 1 position 1",
                       ModelError);
  b = small_batch();
  b.language = 2;
  CHECK_THROWS_AS(b.validate(dims), ModelError);
  b = small_batch();
  b.targets[0].pop_back();
  CHECK_THROWS_AS(b.validate(dims), ModelError);
  b = small_batch();
  b.sources.clear();
  b.targets.clear();
  CHECK_THROWS_AS(b.validate(dims), ModelError);
  b = small_batch();
  b.sources[0].clear();
  b.targets[0].clear();
  CHECK_THROWS_AS(b.validate(dims), ModelError);
}

TEST_CASE("forward: one log-prob row per source position") {
  ModelParams p = init_params(small_dims(), 7);
  Batch b = small_batch();
  RealArray lp = log_prob_rows(p, b);
  REQUIRE(lp.shape == std::vector<std::size_t>{5, 6});
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += std::exp(lp.at(i, j));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("predict: rows are strictly positive distributions") {
  ModelParams p = init_params(small_dims(), 13);
  RealArray probs = predict_distribution(p, small_batch());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      CHECK(probs.at(i, j) > 0.0);
      s += probs.at(i, j);
    }
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("predict: a dominant logit takes nearly all the mass") {
  // Zero weights except one output bias entry 20 above the rest: the row's
  // logits are that bias row exactly.
  ModelDims dims = small_dims();
  ModelParams p = init_params(dims, 1);
  for (auto& [pid, arr] : param_list(p)) {
    (void)pid;
    for (double& v : arr->data) v = 0.0;
  }
  p.output_bias.at(0, 4) = 20.0;
  Batch b;
  b.language = 0;
  b.sources = {{0}};
  b.targets = {{4}};
  RealArray probs = predict_distribution(p, b);
  CHECK(probs.at(0, 4) > 0.999);
  const auto want = oracle::softmax({0, 0, 0, 0, 20.0, 0});
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(probs.at(0, j) == doctest::Approx(want[j]).epsilon(1e-12));
}

TEST_CASE("language embedding changes the prediction") {
  ModelParams p = init_params(small_dims(), 21);
  Batch b0 = small_batch();
  b0.language = 0;
  Batch b1 = small_batch();
  b1.language = 1;
  RealArray p0 = predict_distribution(p, b0);
  RealArray p1 = predict_distribution(p, b1);
  CHECK(p0.data != p1.data);
}

TEST_CASE("full model gradient agrees with central differences") {
  const ModelDims dims = small_dims();
  ModelParams p = init_params(dims, 31);
  const Batch batch = small_batch();

  Tape tape;
  ModelLeaves lv = register_params(tape, p);
  NodeId root = ce_loss(tape, dims, lv, batch);
  tape.forward(root);
  GradientMap got = tape.backward(root);

  oracle::ParamMap params;
  for (auto& [pid, arr] : param_list(p)) params[pid] = *arr;
  auto rebuild = [&](const oracle::ParamMap& pm) {
    ModelParams q = p;
    std::size_t k = 0;
    for (auto& [pid, arr] : param_list(q)) {
      *arr = pm.at(pid);
      ++k;
    }
    return ce_value(q, batch);
  };
  oracle::ParamMap want = oracle::fd_gradients(params, rebuild, 1e-5);
  for (const auto& [pid, arr] : want)
    for (std::size_t i = 0; i < arr.size(); ++i)
      CHECK_MESSAGE(
          oracle::close(got.at(pid).data[i], arr.data[i], 1e-4, 1e-7),
          "param ", pid, " entry ", i);
}

TEST_CASE("checkpoint: bit-exact round trip") {
  ModelParams p = init_params(small_dims(), 55);
  p.hidden_weight.data[0] = 0.1 + 0.2;  // a value with a non-obvious tail
  const std::string path = temp_path("pmd_test_roundtrip.ckpt");
  save_checkpoint(p, path);
  ModelParams q = load_checkpoint(path);
  CHECK(q.dims == p.dims);
  CHECK(q.token_embedding.data == p.token_embedding.data);
  CHECK(q.language_embedding.data == p.language_embedding.data);
  CHECK(q.hidden_weight.data == p.hidden_weight.data);
  CHECK(q.hidden_bias.data == p.hidden_bias.data);
  CHECK(q.output_weight.data == p.output_weight.data);
  CHECK(q.output_bias.data == p.output_bias.data);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: malformed files are rejected") {
  const std::string path = temp_path("pmd_test_bad.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTACKPTxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path),
                       ("checkpoint: not a model checkpoint: " + path).c_str(),
                       ModelError);

  ModelParams p = init_params(small_dims(), 3);
  save_checkpoint(p, path);
  // Truncate the tail.
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 9);
  CHECK_THROWS_AS(load_checkpoint(path), ModelError);
  // Trailing bytes.
  save_checkpoint(p, path);
  {
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << "x";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ModelError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("pmd_no_such_file.ckpt")),
                  ModelError);
  std::remove(path.c_str());
}

}  // TEST_SUITE
