// rdrnet command-line tool. Exit codes: 0 success, 1 verification failure, 2 usage or IO error.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <string>

#include "rdrnet/accounting.hpp"
#include "rdrnet/bench.hpp"
#include "rdrnet/dispatch.hpp"
#include "rdrnet/image_io.hpp"
#include "rdrnet/metrics.hpp"
#include "rdrnet/model_io.hpp"
#include "rdrnet/verify.hpp"

namespace fs = std::filesystem;
using namespace rdrnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;

struct Hw {
  std::size_t h = 0, w = 0;
};

Hw parse_hw(const std::string& s) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw CLI::ValidationError("--input-hw", "expected HxW, got '" + s + "'");
  return {std::stoul(m[1]), std::stoul(m[2])};
}

struct Common {
  std::string config = "rdrnet-micro";
  std::string weights;
  std::uint64_t seed = 0;
  std::string precision = "f32";
  int threads = 0;
};

void add_config(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "YAML config path or preset name")->capture_default_str();
}
void add_precision(CLI::App* cmd, Common& c) {
  cmd->add_option("--precision", c.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
}
void add_threads(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "intra-op threads (default RDRNET_THREADS or 1)");
}

// Deploy-structure network from --weights (either structure) or from --seed.
template <class T>
Network<T> inference_net(const NetworkDef& def, const Common& c) {
  if (c.weights.empty()) return reparameterize_network(build_random<T>(def, {c.seed}));
  Network<T> net = build_from_store<T>(def, load(c.weights));
  return net.structure == Structure::Train ? reparameterize_network(net) : net;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  Common c;
  std::size_t trials = 100;
  std::string hw = "64x128";
  double tolerance = 0.0;
  std::string fault;
};

template <class T>
int run_verify(const VerifyArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  const Hw hw = parse_hw(a.hw);
  VerifyOptions o;
  o.seed = a.c.seed;
  o.trials = a.trials;
  o.height = hw.h;
  o.width = hw.w;
  o.tolerance = a.tolerance;
  if (!a.fault.empty()) o.inject_fault = a.fault;
  VerifyReport r;
  if (a.c.weights.empty()) {
    r = verify_equivalence<T>(def, o);
  } else {
    r = verify_network(build_from_store<T>(def, load(a.c.weights)), o);
  }
  std::cout << format_verify(r);
  if (!r.passed) {
    std::cerr << "verification failed at block " << r.failing_block << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

struct BenchArgs {
  Common c;
  std::string structure = "deploy";
  std::string hw = "256x512";
  std::size_t runs = 22;
  std::size_t batch = 1;
  bool rows = false;
};

template <class T>
int run_bench(const BenchArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  const Hw hw = parse_hw(a.hw);
  Network<T> net = a.c.weights.empty() ? build_random<T>(def, {a.c.seed}) : build_from_store<T>(def, load(a.c.weights));
  if (a.structure == "deploy" && net.structure == Structure::Train) net = reparameterize_network(net);
  if (a.structure == "train" && net.structure == Structure::Deploy)
    throw ContractError("train-structure bench needs train weights");
  BenchOptions o;
  o.runs = a.runs;
  o.threads = a.c.threads;
  o.batch = a.batch;
  o.height = hw.h;
  o.width = hw.w;
  o.seed = a.c.seed;
  const BenchReport r = bench_forward(net, o);
  std::cout << format_bench(r);
  if (a.rows) std::cout << bench_rows(r);
  return kExitOk;
}

struct CountArgs {
  Common c;
  std::string hw = "1024x2048";
  std::string structure = "deploy";
  std::string report;
};

int run_count(const CountArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  const Hw hw = parse_hw(a.hw);
  Network<float> net = make_skeleton<float>(def, Structure::Train);
  if (a.structure == "deploy") net = reparameterize_network(net);
  const CostReport r = count_flops(net, hw.h, hw.w);
  const std::string text = format_report(r);
  std::cout << text;
  if (!a.report.empty()) {
    std::FILE* f = std::fopen(a.report.c_str(), "w");
    if (!f) throw IoError("cannot write report: " + a.report);
    std::fputs(text.c_str(), f);
    std::fclose(f);
  }
  return kExitOk;
}

struct ReparamArgs {
  Common c;
  std::string out;
};

int run_reparam(const ReparamArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  const WeightStore in = load(a.c.weights);
  const WeightStore out = convert_checkpoint(in, def);
  save(out, a.out);
  std::cout << "wrote " << out.size() << " deploy tensors to " << a.out << " (from " << in.size() << " train tensors)\n";
  return kExitOk;
}

struct InitArgs {
  Common c;
  std::string out;
  std::string structure = "train";
};

int run_init(const InitArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  WeightStore store;
  if (a.c.precision == "f64") {
    auto net = build_random<double>(def, {a.c.seed});
    store = export_weights(a.structure == "deploy" ? reparameterize_network(net) : net);
  } else {
    auto net = build_random<float>(def, {a.c.seed});
    store = export_weights(a.structure == "deploy" ? reparameterize_network(net) : net);
  }
  save(store, a.out);
  std::cout << "wrote " << store.size() << " tensors to " << a.out << "\n";
  return kExitOk;
}

int run_inspect(const std::string& path) {
  const WeightStore store = load(path);
  std::cout << "structure " << structure_name(detect_structure(store)) << ", " << store.size() << " tensors\n";
  for (const auto& [name, rec] : store.entries()) {
    std::string dims;
    for (auto d : rec.dims) dims += (dims.empty() ? "" : "x") + std::to_string(d);
    std::printf("%-48s %s [%s] crc32=%08x\n", name.c_str(), dtype_name(rec.dtype), dims.c_str(), tensor_checksum(rec));
  }
  return kExitOk;
}

struct InferArgs {
  Common c;
  std::string image;
  std::string out;
  std::string overlay;
};

int run_infer(const InferArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  const Image8 img = read_image(a.image);
  if (img.channels != 3) throw DimensionError("image.channels", 3, img.channels, "infer input");
  if (img.height % kInputMultiple || img.width % kInputMultiple)
    throw DimensionError("image.size", "image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                           " is not divisible by 64 in both dimensions");
  const Network<float> net = inference_net<float>(def, a.c);
  const LabelMap pred = argmax(forward(net, image_to_tensor(img)).logits);
  write_pgm(labels_to_image(pred), a.out);
  if (!a.overlay.empty()) write_image(colorize(pred, default_palette(def.num_classes)), a.overlay);
  std::cout << "wrote " << a.out << (a.overlay.empty() ? "" : " and " + a.overlay) << "\n";
  return kExitOk;
}

struct EvalArgs {
  Common c;
  std::string data;
  double threshold = 0.7;
  std::size_t min_kept = 0;
};

int run_eval(const EvalArgs& a) {
  const NetworkDef def = resolve_config(a.c.config);
  const Network<float> net = inference_net<float>(def, a.c);
  const fs::path images = fs::path(a.data) / "images", labels = fs::path(a.data) / "labels";
  if (!fs::is_directory(images) || !fs::is_directory(labels))
    throw IoError("dataset dir must contain images/ and labels/: " + a.data);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no images in " + images.string());

  ConfusionMatrix cm(def.num_classes);
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (const auto& f : files) {
    const fs::path label_path = labels / (f.stem().string() + ".pgm");
    const LabelMap truth = image_to_labels(read_image(label_path));
    const Tensor4<float> logits = forward(net, image_to_tensor(read_image(f))).logits;
    cm.add(truth, argmax(logits));
    const OhemResult o = ohem_ce(logits, truth, {a.threshold, a.min_kept});
    if (!o.all_ignored) {
      loss_sum += o.loss;
      ++loss_count;
    }
  }
  std::printf("images %zu\npixels %llu\nmIoU %.6f\npixel_accuracy %.6f\nohem_ce %.6f\n", files.size(),
              static_cast<unsigned long long>(cm.total()), miou(cm), pixel_accuracy(cm),
              loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
  const auto ious = class_iou(cm);
  for (std::size_t c = 0; c < ious.size(); ++c)
    if (ious[c].present) std::printf("iou[%zu] %.6f\n", c, ious[c].iou);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RDRNet reparameterization toolkit and CPU inference engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rdrnet 1.0");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "check train/deploy equivalence on random weights");
  add_config(verify, va.c);
  add_precision(verify, va.c);
  add_threads(verify, va.c);
  verify->add_option("--weights", va.c.weights, "train-structure RDRW file instead of random weights");
  verify->add_option("--seed", va.c.seed)->capture_default_str();
  verify->add_option("--trials", va.trials)->capture_default_str();
  verify->add_option("--input-hw", va.hw)->capture_default_str();
  verify->add_option("--tolerance", va.tolerance, "override the end-to-end tolerance");
  verify->add_option("--inject-fault", va.fault, "perturb this deploy block (test hook)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "time forward passes");
  add_config(bench, ba.c);
  add_precision(bench, ba.c);
  add_threads(bench, ba.c);
  bench->add_option("--weights", ba.c.weights);
  bench->add_option("--seed", ba.c.seed)->capture_default_str();
  bench->add_option("--structure", ba.structure)->check(CLI::IsMember({"train", "deploy"}))->capture_default_str();
  bench->add_option("--input-hw", ba.hw)->capture_default_str();
  bench->add_option("--runs", ba.runs, "total runs; the first 2 are warmup")->check(CLI::Range(3, 100000))->capture_default_str();
  bench->add_option("--batch", ba.batch)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_flag("--rows", ba.rows, "also print machine-readable rows");

  CountArgs ca;
  auto* count = app.add_subcommand("count", "parameter and FLOP table");
  add_config(count, ca.c);
  count->add_option("--input-hw", ca.hw)->capture_default_str();
  count->add_option("--structure", ca.structure)->check(CLI::IsMember({"train", "deploy"}))->capture_default_str();
  count->add_option("--report", ca.report, "also write the table to this file");

  ReparamArgs ra;
  auto* reparam = app.add_subcommand("reparam", "convert a train checkpoint to deploy structure");
  add_config(reparam, ra.c);
  reparam->add_option("--weights", ra.c.weights, "train-structure RDRW input")->required();
  reparam->add_option("--out", ra.out, "deploy-structure RDRW output")->required();

  InitArgs ia;
  auto* init = app.add_subcommand("init", "write seeded random weights");
  add_config(init, ia.c);
  add_precision(init, ia.c);
  init->add_option("--seed", ia.c.seed)->capture_default_str();
  init->add_option("--structure", ia.structure)->check(CLI::IsMember({"train", "deploy"}))->capture_default_str();
  init->add_option("--out", ia.out)->required();

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "list the tensors of an RDRW file");
  inspect->add_option("weights", inspect_path)->required();

  std::string config_name = "rdrnet-micro";
  auto* config = app.add_subcommand("config", "print a preset or config file as YAML");
  config->add_option("config", config_name, "preset name or YAML path")->capture_default_str();

  InferArgs fa;
  auto* infer = app.add_subcommand("infer", "segment one image");
  add_config(infer, fa.c);
  add_threads(infer, fa.c);
  infer->add_option("--weights", fa.c.weights, "RDRW file (random weights from --seed when omitted)");
  infer->add_option("--seed", fa.c.seed)->capture_default_str();
  infer->add_option("--image", fa.image, "PNG or binary PPM input")->required();
  infer->add_option("--out", fa.out, "class-index map (PGM)")->required();
  infer->add_option("--overlay", fa.overlay, "palette-coloured map (.png or .ppm)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "mIoU, pixel accuracy and OHEM loss over a dataset directory");
  add_config(eval, ea.c);
  add_threads(eval, ea.c);
  eval->add_option("--weights", ea.c.weights);
  eval->add_option("--seed", ea.c.seed)->capture_default_str();
  eval->add_option("--data", ea.data, "directory with images/ and labels/")->required();
  eval->add_option("--ohem-threshold", ea.threshold)->capture_default_str();
  eval->add_option("--min-kept", ea.min_kept, "0 means pixels/16");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const Common* c : {&va.c, &ba.c, &fa.c, &ea.c})
      if (c->threads > 0) set_num_threads(c->threads);
    if (*verify) return va.c.precision == "f64" ? run_verify<double>(va) : run_verify<float>(va);
    if (*bench) return ba.c.precision == "f64" ? run_bench<double>(ba) : run_bench<float>(ba);
    if (*count) return run_count(ca);
    if (*reparam) return run_reparam(ra);
    if (*init) return run_init(ia);
    if (*inspect) return run_inspect(inspect_path);
    if (*config) {
      std::cout << dump_config(resolve_config(config_name));
      return kExitOk;
    }
    if (*infer) return run_infer(fa);
    if (*eval) return run_eval(ea);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
