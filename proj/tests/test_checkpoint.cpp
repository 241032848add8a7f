#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "subspec/checkpoint.hpp"
#include "test_util.hpp"

using namespace subspec;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const std::string dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("norm layer state round trip") {
  const std::string dir = temp_dir("subspec_norm_state");
  Rng rng(3);
  NormLayerState layer;
  layer.kind = "ssn";
  layer.cfg.s = 4;
  layer.cfg.affine = AffineType::Sub;
  layer.cfg.eps = 1e-4;
  layer.cfg.momentum = 0.2;
  layer.params = SsnParams(6, layer.cfg);
  for (double& v : layer.params.gamma.v) v = rng.gaussian(1.0, 0.1);
  for (double& v : layer.params.beta.v) v = rng.gaussian();
  layer.stats = SsnRunningStats(6, 4);
  for (double& v : layer.stats.mean.v) v = rng.gaussian();
  layer.stats.batches_seen = 17;

  save_norm_layer(dir, "layer0", layer);
  const NormLayerState loaded = load_norm_layer(dir, "layer0");
  CHECK(loaded.kind == "ssn");
  CHECK(loaded.cfg.s == 4);
  CHECK(loaded.cfg.affine == AffineType::Sub);
  CHECK(loaded.cfg.eps == 1e-4);
  CHECK(loaded.cfg.momentum == 0.2);
  CHECK(loaded.params.gamma.v == layer.params.gamma.v);
  CHECK(loaded.params.beta.v == layer.params.beta.v);
  CHECK(loaded.stats.mean.v == layer.stats.mean.v);
  CHECK(loaded.stats.var.v == layer.stats.var.v);
  CHECK(loaded.stats.batches_seen == 17);
  fs::remove_all(dir);
}

TEST_CASE("model checkpoint round trip preserves inference outputs bitwise") {
  const std::string dir = temp_dir("subspec_model_ckpt");
  Rng rng(7);
  ModelSpec spec;
  spec.norm_kind = NormKind::SSN;
  spec.s = 2;
  spec.affine = AffineType::Sub;
  spec.widths = {4, 6};
  spec.n_classes = 3;
  Model model = init_model(spec, 1, 8, 5, rng);
  // make stats non-trivial
  Tensor4 warm = testutil::random_tensor(4, 1, 8, 5, rng);
  model_forward_train(model, warm);

  save_checkpoint(dir, model);
  const Model loaded = load_checkpoint(dir);
  CHECK(loaded.spec.norm_kind == NormKind::SSN);
  CHECK(loaded.spec.widths == spec.widths);
  CHECK(loaded.param_total() == model.param_total());

  Tensor4 x = testutil::random_tensor(2, 1, 8, 5, rng);
  CHECK(testutil::bit_equal(model_forward_infer(model, x), model_forward_infer(loaded, x)));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint error paths") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/subspec_ckpt"), MissingBlob);

  const std::string dir = temp_dir("subspec_ckpt_bad");
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/checkpoint.json");
    out << "{\"format\": \"subspec-checkpoint-v1\", \"model\": {\"norm\": \"ssn\"}}";
  }
  CHECK_THROWS_AS(load_checkpoint(dir), ManifestParse);
  fs::remove_all(dir);
}
