#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "resbound/backprop.hpp"
#include "resbound/corpus.hpp"
#include "resbound/errors.hpp"
#include "resbound/loss.hpp"
#include "resbound/model.hpp"
#include "resbound/rng.hpp"
#include "resbound/train.hpp"
#include "gradcheck_util.hpp"
#include "test_util.hpp"

using namespace resbound;
using gradcheck::GradcheckSetup;
using gradcheck::isolate;
using gradcheck::max_fd_error;
using gradcheck::reduced_net;
using gradcheck::reduced_sample;

namespace {

GradcheckSetup find_gradcheck_setup(bool clean_near_input) {
  auto g = gradcheck::find_gradcheck_setup(clean_near_input);
  REQUIRE_MESSAGE(g.has_value(), "no kink-free gradcheck configuration found");
  return std::move(*g);
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  const auto ba = param_blocks(a);
  const auto bb = param_blocks(b);
  if (ba.size() != bb.size()) return false;
  for (size_t i = 0; i < ba.size(); ++i) {
    if (ba[i]->size() != bb[i]->size()) return false;
    if (std::memcmp(ba[i]->data(), bb[i]->data(),
                    ba[i]->size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

PhantomSpec small_spec() {
  PhantomSpec spec;
  spec.height = 24;
  spec.width = 24;
  spec.depth = 4;
  spec.n_vessels = 1;
  spec.aneurysm_probability = 0.5;
  return spec;
}

}  // namespace

TEST_CASE("analytic gradients match central differences per term and combined") {
  GradcheckSetup far = find_gradcheck_setup(false);
  for (int term = 0; term < 5; ++term) {
    if (term == 1) continue;  // identity gate is dead when clean is far off
    const double err = max_fd_error(far, isolate(term));
    CAPTURE(term);
    CHECK(err < 1e-4);
  }
  CHECK(max_fd_error(far, LossWeights{}) < 1e-4);

  GradcheckSetup near = find_gradcheck_setup(true);
  CHECK(max_fd_error(near, isolate(1)) < 1e-4);
  CHECK(max_fd_error(near, LossWeights{}) < 1e-4);
}

TEST_CASE("all-zero loss weights produce exactly zero gradients") {
  rng::Stream s(5, 0x93, 0);
  NetT<float> net = NetT<float>::make_custom({3, 4});
  for (auto* blk : param_blocks(net))
    for (float& x : *blk) x = float(s.uniform(-0.5, 0.5));
  TrainSample<float> smp;
  smp.input = TensorT<float>(3, 8, 8);
  for (float& v : smp.input.v) v = s.next_float();
  smp.clean.resize(64);
  for (float& v : smp.clean) v = s.next_float();

  LossWeights zero;
  zero.restore = zero.identity = zero.edit = zero.smooth = zero.uncertainty = 0;
  const auto bg = batch_gradients(net, {smp}, zero);
  for (auto* blk : param_blocks(std::as_const(bg.grads)))
    for (float g : *blk) CHECK(g == 0.0f);
}

TEST_CASE("duplicating every batch element leaves mean gradients unchanged") {
  NetT<double> net = reduced_net(9);
  const TrainSample<double> a = reduced_sample(31, false);
  const TrainSample<double> b = reduced_sample(32, false);

  const auto once = batch_gradients(net, {a, b}, LossWeights{});
  const auto twice = batch_gradients(net, {a, b, a, b}, LossWeights{});
  const auto blk1 = param_blocks(std::as_const(once.grads));
  const auto blk2 = param_blocks(std::as_const(twice.grads));
  for (size_t bi = 0; bi < blk1.size(); ++bi)
    for (size_t i = 0; i < blk1[bi]->size(); ++i)
      CHECK((*blk2[bi])[i] ==
            doctest::Approx((*blk1[bi])[i]).epsilon(1e-12).scale(1e-12));
  CHECK(twice.loss.total == doctest::Approx(once.loss.total).epsilon(1e-12));

  CHECK_THROWS_AS(batch_gradients(net, {}, LossWeights{}), DataError);
}

TEST_CASE("initialization: bounded he-uniform trunk, zero heads, reproducible") {
  const ModelParams p = init_params(42);
  for (size_t li = 0; li < p.trunk.size(); ++li) {
    const double bound = std::sqrt(6.0 / (double(p.trunk[li].in_ch) * 9.0));
    for (float w : p.trunk[li].w) CHECK(std::abs(w) <= bound);
    for (float b : p.trunk[li].b) CHECK(b == 0.0f);
  }
  for (const ConvLayerT<float>* head : {&p.head_r, &p.head_m, &p.head_u}) {
    for (float w : head->w) CHECK(w == 0.0f);
    for (float b : head->b) CHECK(b == 0.0f);
  }
  CHECK(params_equal(p, init_params(42)));
  CHECK(!params_equal(p, init_params(43)));

  // Zero heads make the fresh model the identity restorer: the restore term
  // equals the plain input error.
  rng::Stream s(6, 0x94, 0);
  TensorT<float> input(3, 8, 8);
  for (float& v : input.v) v = s.next_float();
  std::vector<float> clean(64);
  for (float& v : clean) v = s.next_float();
  const LossBreakdown b = sample_loss_grad(p, input, clean, LossWeights{});
  double base_err = 0;
  for (size_t i = 0; i < 64; ++i)
    base_err += std::abs(double(input.plane(1)[i]) - double(clean[i]));
  base_err /= 64;
  CHECK(b.restore == doctest::Approx(base_err).epsilon(1e-12));
}

TEST_CASE("train loop: logging, validation cadence, determinism") {
  testutil::TempDir tmp("train");
  write_phantom_corpus(tmp.path.string(), small_spec(), 0x900, 6);

  TrainConfig cfg;
  cfg.steps = 5;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-3;
  cfg.seed = 77;
  cfg.corpus_dir = tmp.path.string();
  cfg.validation_fraction = 0.2;  // 6 cases -> 1 validation case
  cfg.validation_interval = 2;

  const TrainResult r1 = train(cfg);
  CHECK(r1.log.rows.size() == 5);
  CHECK(r1.log.val_restore_step0.has_value());
  CHECK(r1.log.rows[0].val_restore.has_value() == false);
  CHECK(r1.log.rows[1].val_restore.has_value());  // step 2
  CHECK(r1.log.rows[3].val_restore.has_value());  // step 4
  CHECK(r1.log.rows[4].val_restore.has_value());  // final step always logs
  for (const auto& row : r1.log.rows) {
    const LossWeights w;
    const double expect =
        w.restore * row.loss.restore + w.identity * row.loss.identity +
        w.edit * row.loss.edit + w.smooth * row.loss.smooth +
        w.uncertainty * row.loss.uncertainty;
    CHECK(row.loss.total == doctest::Approx(expect).epsilon(1e-12));
  }

  const std::string csv = r1.log.to_csv();
  CHECK(csv.rfind("step,restore,identity,edit,smooth,uncertainty,total,val_restore\n",
                  0) == 0);
  CHECK(csv.find("\n0,,,,,,,") != std::string::npos);

  const TrainResult r2 = train(cfg);
  CHECK(params_equal(r1.params, r2.params));
  CHECK(r2.log.to_csv() == csv);

  CHECK(r1.meta.train_case_ids.size() == 6);
  CHECK(r1.meta.rng_name == "philox4x32-10");
  CHECK(!r1.meta.train_config_text.empty());

  // the loop must have moved the parameters
  CHECK(!params_equal(r1.params, init_params(cfg.seed)));
}

TEST_CASE("one step at zero learning rate leaves parameters untouched") {
  testutil::TempDir tmp("train");
  write_phantom_corpus(tmp.path.string(), small_spec(), 0x901, 3);

  TrainConfig cfg;
  cfg.steps = 1;
  cfg.batch_size = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 5;
  cfg.corpus_dir = tmp.path.string();
  cfg.validation_fraction = 0.0;

  const TrainResult r = train(cfg);
  CHECK(params_equal(r.params, init_params(cfg.seed)));
  CHECK(!r.log.val_restore_step0.has_value());
}

TEST_CASE("numeric blow-ups abort with the offending step named") {
  testutil::TempDir tmp("train");
  write_phantom_corpus(tmp.path.string(), small_spec(), 0x902, 3);

  TrainConfig base;
  base.steps = 10;
  base.batch_size = 1;
  base.seed = 3;
  base.corpus_dir = tmp.path.string();
  base.validation_fraction = 0.0;

  SUBCASE("overflowing backward coefficients are caught by the gradient scan") {
    TrainConfig cfg = base;
    cfg.weights.restore = 1e308;  // per-pixel coefficient overflows in float
    try {
      train(cfg);
      FAIL("expected a gradient-scan abort");
    } catch (const NumericError& ex) {
      CHECK(std::string(ex.what()).find("step 1") != std::string::npos);
    }
  }

  SUBCASE("runaway parameters push the loss itself non-finite") {
    TrainConfig cfg = base;
    cfg.learning_rate = 1e38;  // one Adam step flings head kernels to ~1e38
    try {
      train(cfg);
      FAIL("expected a divergence abort");
    } catch (const NumericError& ex) {
      CHECK(std::string(ex.what()).find("diverged at step") != std::string::npos);
    }
  }
}

TEST_CASE("train config json: defaults, round trip, rejection") {
  TrainConfig c;
  c.corpus_dir = "corpus";
  const std::string text = c.to_json_text();
  const TrainConfig back = TrainConfig::from_json_text(text);
  CHECK(back.to_json_text() == text);
  CHECK(back.steps == 5000);
  CHECK(back.batch_size == 2);
  CHECK(back.adam.beta1 == 0.9);
  CHECK(back.adam.beta2 == 0.999);
  CHECK(back.adam.epsilon == 1e-8);
  CHECK(back.validation_interval == 500);
  CHECK(back.weights.restore == 1.0);
  CHECK(back.weights.identity == 0.5);
  CHECK(back.weights.edit == 0.1);
  CHECK(back.weights.smooth == 0.05);
  CHECK(back.weights.uncertainty == 0.1);

  const TrainConfig partial =
      TrainConfig::from_json_text(R"({"steps": 7, "corpus_dir": "x"})");
  CHECK(partial.steps == 7);
  CHECK(partial.batch_size == 2);

  CHECK_THROWS_AS(
      TrainConfig::from_json_text(R"({"steps": 0, "corpus_dir": "x"})"),
      DataError);
  CHECK_THROWS_AS(
      TrainConfig::from_json_text(R"({"learning_rate": -1, "corpus_dir": "x"})"),
      DataError);
  CHECK_THROWS_AS(TrainConfig::from_json_text("not json"), DataError);

  TrainConfig bad = c;
  bad.validation_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("missing corpus is a data error") {
  TrainConfig cfg;
  cfg.corpus_dir = "/nonexistent/corpus/dir";
  CHECK_THROWS_AS(train(cfg), DataError);
}
