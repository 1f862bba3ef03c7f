#include "objcap/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "objcap/decode.hpp"
#include "objcap/synth.hpp"

namespace objcap {

using nlohmann::ordered_json;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> sorted_labels(const std::vector<ImageRecord>& records) {
  std::set<std::string> labels;
  for (const auto& r : records) {
    for (const auto& o : r.objects) labels.insert(o.label);
  }
  return {labels.begin(), labels.end()};
}

std::filesystem::path relative_to(const std::filesystem::path& target,
                                  const std::filesystem::path& dir) {
  auto rel = std::filesystem::absolute(target).lexically_normal().lexically_relative(
      std::filesystem::absolute(dir).lexically_normal());
  return rel.empty() ? target : rel;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string fixed6(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

TrainingRun run_training(const RunSpec& spec, std::ostream& log) {
  std::vector<ImageRecord> records = load_records(spec.records);
  DatasetSplit split = spec.split ? split_dataset(std::move(records), spec.split_seed, *spec.split)
                                  : split_dataset(std::move(records), spec.split_seed);
  Vocabulary vocab = build_vocab(split.train, spec.min_count);

  ModelConfig config = spec.model;
  if (config.vocab_size != 0 && config.vocab_size != vocab.size()) {
    throw ValidationError("config vocab_size " + std::to_string(config.vocab_size) +
                          " differs from the built vocabulary size " +
                          std::to_string(vocab.size()));
  }
  config.vocab_size = vocab.size();
  Model model = Model::build(config);

  std::string glove_hash;
  if (config.variant == Variant::m3) {
    const GloveTable glove = load_glove(spec.glove);
    glove_hash = glove.hash();
    model.set_label_table(sorted_labels(split.train), glove);
  }

  const auto train_set = make_training_set(model, split.train, vocab, spec.train.caption_mode);
  const auto val_set = make_eval_set(model, split.val, vocab);
  log << "training " << variant_name(config.variant) << ": " << split.train.size()
      << " train / " << split.val.size() << " val / " << split.test.size() << " test images, vocab "
      << vocab.size() << ", " << model.parameter_count() << " parameters\n";

  RunHistory history = train(model, train_set, val_set, vocab, spec.train, [&](const EpochStats& e) {
    log << "epoch " << e.epoch << " loss " << e.train_loss;
    if (e.val_bleu) log << " val_bleu " << *e.val_bleu;
    log << '\n';
  });

  std::filesystem::create_directories(spec.output_dir);
  Checkpoint ckpt{std::move(model), std::move(vocab), glove_hash,
                  relative_to(spec.records, spec.output_dir).generic_string()};
  save_checkpoint(spec.output_dir / "checkpoint.json", ckpt);
  write_text(spec.output_dir / "history.csv", history.to_csv());
  save_records(spec.output_dir / "test.jsonl", split.test);
  return TrainingRun{std::move(ckpt), std::move(history), std::move(split)};
}

std::string report_to_json(const EvaluationResult& result, const Checkpoint& ckpt) {
  const auto& r = result.report;
  ordered_json captions = ordered_json::array();
  for (const auto& [id, tokens] : result.hypotheses) {
    std::string text;
    for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
    captions.push_back({{"id", id}, {"caption", text}});
  }
  ordered_json j = {{"bleu", r.bleu},
                    {"max_n", result.max_n},
                    {"precisions", r.precisions},
                    {"matches", r.matches},
                    {"totals", r.totals},
                    {"brevity_penalty", r.brevity_penalty},
                    {"hypothesis_length", r.hypothesis_length},
                    {"reference_length", r.reference_length},
                    {"images", result.hypotheses.size()},
                    {"variant", std::string(variant_name(ckpt.model.config().variant))},
                    {"vocab_hash", ckpt.vocab.hash()},
                    {"captions", captions}};
  return j.dump(2) + "\n";
}

namespace {

int cmd_prepare(const std::string& captions, const std::string& features, const std::string& out,
                std::ostream& os) {
  const CocoConversion conv = convert_coco(captions, features);
  save_records(out, conv.records);
  os << "wrote " << conv.records.size() << " records to " << out << " (skipped "
     << conv.skipped_few_captions << " with fewer than 5 captions, " << conv.skipped_no_features
     << " without features)\n";
  return kExitOk;
}

int cmd_synth(const SynthOptions& opt, const std::string& out_dir, std::ostream& os) {
  const SynthCorpus corpus = synth_corpus(opt);
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  save_records(dir / "records.jsonl", corpus.records);
  save_glove(dir / "glove.txt", corpus.glove);

  RunSpec spec;
  spec.model = ModelConfig::defaults(Variant::m3, 0);
  spec.model.visual_dim = opt.visual_dim;
  spec.model.label_embed_dim = opt.glove_dim;
  spec.model.max_objects = std::max<std::size_t>(opt.max_objects_per_image, 1);
  spec.records = "records.jsonl";
  spec.glove = "glove.txt";
  spec.output_dir = "run";
  write_text(dir / "config.json", runspec_to_json(spec));
  os << "wrote " << corpus.records.size() << " records, " << corpus.glove.size()
     << " label vectors and a starter config to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, std::ostream& os) {
  const RunSpec spec = load_runspec(config_path);
  const TrainingRun run = run_training(spec, os);
  os << "wrote " << (spec.output_dir / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& test, std::string out,
             std::size_t max_n, std::ostream& os) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto records = load_records(test);
  const auto items = make_eval_set(ckpt.model, records, ckpt.vocab);
  const EvaluationResult result = evaluate(ckpt.model, items, ckpt.vocab, max_n);
  const std::string report = report_to_json(result, ckpt);
  if (out.empty()) out = (std::filesystem::path(checkpoint).parent_path() / "report.json").string();
  write_text(out, report);
  os << report;
  return kExitOk;
}

int cmd_caption(const std::string& checkpoint, const std::string& record_id,
                std::string records_path, std::size_t beam, std::ostream& os) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (records_path.empty()) {
    if (ckpt.records_path.empty()) throw ValidationError("no records file known; pass --records");
    records_path =
        (std::filesystem::path(checkpoint).parent_path() / ckpt.records_path).string();
  }
  const auto records = load_records(records_path);
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const ImageRecord& r) { return r.id == record_id; });
  if (it == records.end()) throw ValidationError("no record with id '" + record_id + "'");
  const Example ex = make_example(ckpt.model, *it, ckpt.vocab, std::nullopt);
  const Tensor enc = inference_encoding(ckpt.model, ex);
  const Hypothesis hyp = beam <= 1 ? decode_greedy(ckpt.model, enc) : decode_beam(ckpt.model, enc, beam);
  const TokenList words = render_tokens(ckpt.vocab, hyp.tokens);
  std::string line;
  for (const auto& w : words) line += (line.empty() ? "" : " ") + w;
  os << line << "\n";
  return kExitOk;
}

int cmd_bleu(const std::string& hyp_path, const std::string& refs_path, std::size_t max_n,
             std::ostream& os) {
  const auto hyps = read_lines(hyp_path);
  const auto refs = read_lines(refs_path);
  if (hyps.size() != refs.size()) {
    throw ValidationError("hypothesis file has " + std::to_string(hyps.size()) +
                          " lines but reference file has " + std::to_string(refs.size()));
  }
  std::vector<std::pair<TokenList, std::vector<TokenList>>> pairs;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    std::vector<TokenList> alternatives;
    std::istringstream fields(refs[i]);
    std::string ref;
    while (std::getline(fields, ref, '\t')) alternatives.push_back(split_ws(ref));
    if (alternatives.empty()) alternatives.emplace_back();
    pairs.emplace_back(split_ws(hyps[i]), std::move(alternatives));
  }
  if (pairs.empty()) throw ValidationError("no hypotheses to score");
  const BleuReport r = corpus_bleu_report(pairs, max_n, uniform_weights(max_n));
  os << "BLEU-" << max_n << " " << fixed6(r.bleu) << "\n";
  for (std::size_t n = 0; n < max_n; ++n) {
    os << "p" << n + 1 << " " << fixed6(r.precisions[n]) << " (" << r.matches[n] << "/"
       << r.totals[n] << ")\n";
  }
  os << "BP " << fixed6(r.brevity_penalty) << " (hyp " << r.hypothesis_length << ", ref "
     << r.reference_length << ")\n";
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object-level image captioning: data preparation, training, evaluation"};
  app.require_subcommand(1);

  std::string prep_captions, prep_features, prep_out;
  auto* prepare = app.add_subcommand("prepare", "Convert MSCOCO captions + object features into records");
  prepare->add_option("--coco-captions", prep_captions, "MSCOCO caption JSON")->required();
  prepare->add_option("--features", prep_features, "JSON-lines object features keyed by image_id")->required();
  prepare->add_option("--out", prep_out, "Output records file (JSON lines)")->required();

  SynthOptions synth_opt;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and GLOVE file");
  synth->add_option("--seed", synth_opt.seed, "Random seed")->required();
  synth->add_option("--images", synth_opt.images, "Number of images")->required();
  synth->add_option("--labels", synth_opt.labels, "Number of object labels")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--visual-dim", synth_opt.visual_dim, "Object feature length");
  synth->add_option("--glove-dim", synth_opt.glove_dim, "Label vector length");

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");
  train_cmd->add_option("--config", train_config, "Run configuration (JSON)")->required();

  std::string eval_ckpt, eval_test, eval_out;
  std::size_t eval_max_n = 4;
  auto* eval = app.add_subcommand("eval", "Greedy-decode a test set and report corpus BLEU");
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--test", eval_test, "Test records (JSON lines)")->required();
  eval->add_option("--out", eval_out, "Report path (default: report.json next to the checkpoint)");
  eval->add_option("--max-n", eval_max_n, "Largest n-gram order")->check(CLI::PositiveNumber);

  std::string cap_ckpt, cap_id, cap_records;
  std::size_t cap_beam = 1;
  auto* caption = app.add_subcommand("caption", "Caption one record");
  caption->add_option("--checkpoint", cap_ckpt, "Checkpoint file")->required();
  caption->add_option("--record-id", cap_id, "Record id")->required();
  caption->add_option("--beam", cap_beam, "Beam width (1 = greedy)")->check(CLI::PositiveNumber);
  caption->add_option("--records", cap_records, "Records file (default: the training records)");

  std::string bleu_hyp, bleu_refs;
  std::size_t bleu_max_n = 4;
  auto* bleu = app.add_subcommand("bleu", "Score hypothesis lines against tab-separated reference lines");
  bleu->add_option("--hyp", bleu_hyp, "One tokenized hypothesis per line")->required();
  bleu->add_option("--refs", bleu_refs, "Tab-separated tokenized references per line")->required();
  bleu->add_option("--max-n", bleu_max_n, "Largest n-gram order")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*prepare) return cmd_prepare(prep_captions, prep_features, prep_out, out);
    if (*synth) return cmd_synth(synth_opt, synth_out, out);
    if (*train_cmd) return cmd_train(train_config, out);
    if (*eval) return cmd_eval(eval_ckpt, eval_test, eval_out, eval_max_n, out);
    if (*caption) return cmd_caption(cap_ckpt, cap_id, cap_records, cap_beam, out);
    if (*bleu) return cmd_bleu(bleu_hyp, bleu_refs, bleu_max_n, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace objcap
