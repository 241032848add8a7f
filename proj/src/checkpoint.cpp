#include "subspec/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace subspec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingBlob("cannot open manifest: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ManifestParse("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Io("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

json norm_layer_json(const NormLayerState& layer, const std::string& prefix) {
  return json{{"kind", layer.kind},
              {"s", layer.cfg.s},
              {"affine", to_string(layer.cfg.affine)},
              {"eps", layer.cfg.eps},
              {"momentum", layer.cfg.momentum},
              {"batches_seen", layer.stats.batches_seen},
              {"gamma", prefix + "_gamma.tns4"},
              {"beta", prefix + "_beta.tns4"},
              {"running_mean", prefix + "_rmean.tns4"},
              {"running_var", prefix + "_rvar.tns4"}};
}

void save_norm_blobs(const std::string& dir, const std::string& prefix,
                     const NormLayerState& layer) {
  save_mat(dir + "/" + prefix + "_gamma.tns4", layer.params.gamma);
  save_mat(dir + "/" + prefix + "_beta.tns4", layer.params.beta);
  save_mat(dir + "/" + prefix + "_rmean.tns4", layer.stats.mean);
  save_mat(dir + "/" + prefix + "_rvar.tns4", layer.stats.var);
}

NormLayerState norm_layer_from_json(const std::string& dir, const json& j) {
  NormLayerState layer;
  try {
    layer.kind = j.at("kind").get<std::string>();
    layer.cfg.s = j.at("s").get<std::size_t>();
    layer.cfg.affine = affine_from_string(j.at("affine").get<std::string>());
    layer.cfg.eps = j.at("eps").get<double>();
    layer.cfg.momentum = j.at("momentum").get<double>();
    layer.stats.batches_seen = j.at("batches_seen").get<std::uint64_t>();
    layer.params.gamma = load_mat(dir + "/" + j.at("gamma").get<std::string>());
    layer.params.beta = load_mat(dir + "/" + j.at("beta").get<std::string>());
    layer.stats.mean = load_mat(dir + "/" + j.at("running_mean").get<std::string>());
    layer.stats.var = load_mat(dir + "/" + j.at("running_var").get<std::string>());
  } catch (const json::exception& e) {
    throw ManifestParse(std::string("norm layer manifest: ") + e.what());
  }
  return layer;
}

Tensor4 conv_weight_tensor(const Conv2dParams& cv) {
  Tensor4 w(cv.c_out, cv.c_in, cv.k_f, cv.k_t);
  w.data = cv.weight;
  return w;
}

}  // namespace

void save_norm_layer(const std::string& dir, const std::string& prefix,
                     const NormLayerState& layer) {
  fs::create_directories(dir);
  save_norm_blobs(dir, prefix, layer);
  write_json(dir + "/" + prefix + ".json", norm_layer_json(layer, prefix));
}

NormLayerState load_norm_layer(const std::string& dir, const std::string& prefix) {
  return norm_layer_from_json(dir, load_json(dir + "/" + prefix + ".json"));
}

void save_checkpoint(const std::string& dir, const Model& model) {
  fs::create_directories(dir);
  json layers = json::array();
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    const auto& cv = model.convs[i];
    const std::string prefix = "conv" + std::to_string(i);
    save_tensor(dir + "/" + prefix + "_w.tns4", conv_weight_tensor(cv));
    Mat b(1, cv.bias.size());
    b.v = cv.bias;
    save_mat(dir + "/" + prefix + "_b.tns4", b);
    layers.push_back(json{{"type", "conv"},
                          {"pad_f", cv.pad_f},
                          {"pad_t", cv.pad_t},
                          {"weight", prefix + "_w.tns4"},
                          {"bias", prefix + "_b.tns4"}});

    const std::string nprefix = "norm" + std::to_string(i);
    NormLayerState nl{model.spec.norm_kind == NormKind::BNSub ? "bnsub" : "ssn",
                      model.spec.norm_config(), model.norms[i].params, model.norms[i].stats};
    save_norm_blobs(dir, nprefix, nl);
    json nj = norm_layer_json(nl, nprefix);
    nj["type"] = "norm";
    layers.push_back(nj);
  }
  Mat dw(model.dense.out, model.dense.in);
  dw.v = model.dense.weight;
  save_mat(dir + "/dense_w.tns4", dw);
  Mat db(1, model.dense.bias.size());
  db.v = model.dense.bias;
  save_mat(dir + "/dense_b.tns4", db);
  layers.push_back(json{{"type", "dense"}, {"weight", "dense_w.tns4"}, {"bias", "dense_b.tns4"}});

  const json manifest{
      {"format", "subspec-checkpoint-v1"},
      {"model",
       {{"norm", to_string(model.spec.norm_kind)},
        {"s", model.spec.s},
        {"affine", to_string(model.spec.affine)},
        {"widths", model.spec.widths},
        {"kernel", model.spec.kernel},
        {"n_classes", model.spec.n_classes},
        {"in_c", model.in_c},
        {"in_f", model.in_f},
        {"in_t", model.in_t}}},
      {"layers", layers}};
  write_json(dir + "/checkpoint.json", manifest);
}

Model load_checkpoint(const std::string& dir) {
  const json manifest = load_json(dir + "/checkpoint.json");
  Model model;
  try {
    if (manifest.at("format").get<std::string>() != "subspec-checkpoint-v1")
      throw ManifestParse("unsupported checkpoint format");
    const json& jm = manifest.at("model");
    model.spec.norm_kind = norm_kind_from_string(jm.at("norm").get<std::string>());
    model.spec.s = jm.at("s").get<std::size_t>();
    model.spec.affine = affine_from_string(jm.at("affine").get<std::string>());
    model.spec.widths = jm.at("widths").get<std::vector<std::size_t>>();
    model.spec.kernel = jm.at("kernel").get<std::size_t>();
    model.spec.n_classes = jm.at("n_classes").get<std::size_t>();
    model.in_c = jm.at("in_c").get<std::size_t>();
    model.in_f = jm.at("in_f").get<std::size_t>();
    model.in_t = jm.at("in_t").get<std::size_t>();

    std::size_t prev = model.in_c;
    for (const json& jl : manifest.at("layers")) {
      const std::string type = jl.at("type").get<std::string>();
      if (type == "conv") {
        const Tensor4 w = load_tensor(dir + "/" + jl.at("weight").get<std::string>());
        Conv2dParams cv(w.n, w.c, w.f, w.t, jl.at("pad_f").get<std::size_t>(),
                        jl.at("pad_t").get<std::size_t>());
        cv.weight = w.data;
        cv.bias = load_mat(dir + "/" + jl.at("bias").get<std::string>()).v;
        cv.validate();
        if (cv.c_in != prev) throw ManifestParse("conv layer channel chain broken");
        prev = cv.c_out;
        model.convs.push_back(std::move(cv));
      } else if (type == "norm") {
        const NormLayerState nl = norm_layer_from_json(dir, jl);
        model.norms.push_back(NormLayer{nl.params, nl.stats});
      } else if (type == "dense") {
        const Mat dw = load_mat(dir + "/" + jl.at("weight").get<std::string>());
        model.dense = DenseParams(dw.rows, dw.cols);
        model.dense.weight = dw.v;
        model.dense.bias = load_mat(dir + "/" + jl.at("bias").get<std::string>()).v;
      } else {
        throw ManifestParse("unknown layer type: " + type);
      }
    }
  } catch (const json::exception& e) {
    throw ManifestParse(std::string("checkpoint manifest: ") + e.what());
  }
  if (model.convs.size() != model.norms.size() || model.convs.empty())
    throw ManifestParse("checkpoint must pair each conv with a norm layer");
  return model;
}

}  // namespace subspec
