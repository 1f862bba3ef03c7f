#include "objcap/runspec.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace objcap {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "variant",      "visual_dim",      "reduced_dim",   "text_embed_dim", "lang_hidden",
      "decoder_hidden", "label_embed_dim", "max_objects", "vocab_size",     "max_caption_len",
      "model_seed",   "epochs",          "learning_rate", "batch_size",     "optimizer",
      "grad_clip_norm", "train_seed",    "caption_mode",  "target_loss",    "record_wall_time",
      "records",      "glove",           "output_dir",    "min_count",      "split_seed",
      "split"};
  return keys;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunSpec parse_runspec(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().count(key)) throw ValidationError("unknown config key '" + key + "'");
  }

  try {
    RunSpec spec;
    const Variant variant = parse_variant(j.value("variant", std::string("m3")));
    spec.model = ModelConfig::defaults(variant, 0);
    auto& m = spec.model;
    m.visual_dim = j.value("visual_dim", m.visual_dim);
    m.reduced_dim = j.value("reduced_dim", m.reduced_dim);
    m.text_embed_dim = j.value("text_embed_dim", m.text_embed_dim);
    m.lang_hidden = j.value("lang_hidden", m.lang_hidden);
    m.decoder_hidden = j.value("decoder_hidden", m.decoder_hidden);
    m.label_embed_dim = j.value("label_embed_dim", m.label_embed_dim);
    m.max_objects = j.value("max_objects", m.max_objects);
    m.vocab_size = j.value("vocab_size", std::size_t{0});
    m.max_caption_len = j.value("max_caption_len", m.max_caption_len);
    m.rng_seed = j.value("model_seed", m.rng_seed);

    auto& t = spec.train;
    t.epochs = j.value("epochs", t.epochs);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.batch_size = j.value("batch_size", t.batch_size);
    const auto opt = j.value("optimizer", std::string("adam"));
    if (opt == "adam") {
      t.optimizer = OptimizerKind::adam;
    } else if (opt == "sgd") {
      t.optimizer = OptimizerKind::sgd;
    } else {
      throw ValidationError("optimizer must be 'adam' or 'sgd', got '" + opt + "'");
    }
    if (j.contains("grad_clip_norm")) {
      t.grad_clip_norm = j["grad_clip_norm"].is_null()
                             ? std::nullopt
                             : std::optional<double>(j["grad_clip_norm"].get<double>());
    }
    t.rng_seed = j.value("train_seed", t.rng_seed);
    const auto mode = j.value("caption_mode", std::string("all"));
    if (mode == "all") {
      t.caption_mode = CaptionMode::all;
    } else if (mode == "first") {
      t.caption_mode = CaptionMode::first;
    } else {
      throw ValidationError("caption_mode must be 'all' or 'first', got '" + mode + "'");
    }
    if (j.contains("target_loss") && !j["target_loss"].is_null()) {
      t.target_loss = j["target_loss"].get<double>();
    }
    t.record_wall_time = j.value("record_wall_time", t.record_wall_time);
    t.validate();

    if (!j.contains("records")) throw ValidationError("config needs 'records'");
    if (!j.contains("output_dir")) throw ValidationError("config needs 'output_dir'");
    spec.records = resolve(base_dir, j["records"].get<std::string>());
    spec.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("glove")) spec.glove = resolve(base_dir, j["glove"].get<std::string>());
    if (variant == Variant::m3 && spec.glove.empty()) {
      throw ValidationError("variant m3 needs a 'glove' file for label vectors");
    }
    spec.min_count = j.value("min_count", spec.min_count);
    if (spec.min_count == 0) throw ValidationError("min_count must be >= 1");
    spec.split_seed = j.value("split_seed", spec.split_seed);
    if (j.contains("split")) {
      const auto& s = j["split"];
      for (const auto& [key, value] : s.items()) {
        if (key != "train" && key != "val" && key != "test") {
          throw ValidationError("unknown split key '" + key + "'");
        }
      }
      spec.split = SplitSizes{s.at("train").get<std::size_t>(), s.at("val").get<std::size_t>(),
                              s.at("test").get<std::size_t>()};
    }
    return spec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

RunSpec load_runspec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_runspec(buf.str(), path.parent_path());
}

std::string runspec_to_json(const RunSpec& spec) {
  const auto& m = spec.model;
  const auto& t = spec.train;
  ordered_json j = {
      {"variant", std::string(variant_name(m.variant))},
      {"visual_dim", m.visual_dim},
      {"reduced_dim", m.reduced_dim},
      {"text_embed_dim", m.text_embed_dim},
      {"lang_hidden", m.lang_hidden},
      {"decoder_hidden", m.decoder_hidden},
      {"label_embed_dim", m.label_embed_dim},
      {"max_objects", m.max_objects},
      {"max_caption_len", m.max_caption_len},
      {"model_seed", m.rng_seed},
      {"epochs", t.epochs},
      {"learning_rate", t.learning_rate},
      {"batch_size", t.batch_size},
      {"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
      {"grad_clip_norm", t.grad_clip_norm ? ordered_json(*t.grad_clip_norm) : ordered_json(nullptr)},
      {"train_seed", t.rng_seed},
      {"caption_mode", t.caption_mode == CaptionMode::all ? "all" : "first"},
      {"target_loss", t.target_loss ? ordered_json(*t.target_loss) : ordered_json(nullptr)},
      {"record_wall_time", t.record_wall_time},
      {"records", spec.records.generic_string()},
      {"glove", spec.glove.generic_string()},
      {"output_dir", spec.output_dir.generic_string()},
      {"min_count", spec.min_count},
      {"split_seed", spec.split_seed}};
  if (spec.split) {
    j["split"] = {{"train", spec.split->train}, {"val", spec.split->val}, {"test", spec.split->test}};
  }
  return j.dump(2) + "\n";
}

}  // namespace objcap
