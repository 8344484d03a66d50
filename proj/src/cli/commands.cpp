#include "nvr/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "nvr/cli/experiments.hpp"
#include "nvr/cli/manifest.hpp"
#include "nvr/codec.hpp"
#include "nvr/errors.hpp"
#include "nvr/meta.hpp"
#include "nvr/metrics.hpp"
#include "nvr/render.hpp"
#include "nvr/synthetic.hpp"
#include "nvr/trainer.hpp"

namespace nvr::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

struct VolumeArgs {
  std::string dims;
  std::string dtype = "f32";
  std::string endian = "le";
  std::string desc;
};

void add_volume_args(CLI::App* sub, VolumeArgs& a) {
  sub->add_option("--dims", a.dims, "Grid size X,Y,Z (otherwise read from --desc or <input>.desc)");
  sub->add_option("--dtype", a.dtype, "Sample type: u8|u16|i16|i32|f32");
  sub->add_option("--endian", a.endian, "Byte order: le|be");
  sub->add_option("--desc", a.desc, "Descriptor file with dims=/dtype=/endian= lines");
}

// Explicit --dims wins, then --desc, then a sidecar next to the data.
RawDescriptor resolve_descriptor(const fs::path& input, const VolumeArgs& a, const CLI::App* sub) {
  if (!a.dims.empty()) {
    return {parse_dims(a.dims), {parse_dtype(a.dtype), parse_endian(a.endian)}};
  }
  fs::path desc = a.desc.empty() ? fs::path(input.string() + ".desc") : fs::path(a.desc);
  if (!fs::exists(desc)) {
    throw InputError("no --dims given and no descriptor '" + desc.string() + "' for '" + input.string() + "'");
  }
  RawDescriptor d = read_descriptor(desc);
  if (sub->count("--dtype") > 0) d.dtype.kind = parse_dtype(a.dtype);
  if (sub->count("--endian") > 0) d.dtype.endian = parse_endian(a.endian);
  return d;
}

void write_descriptor(const fs::path& data, const RawDescriptor& d) {
  std::ofstream out(data.string() + ".desc", std::ios::trunc);
  if (!out) throw IoError("cannot write descriptor for '" + data.string() + "'");
  out << format_descriptor(d);
}

struct EncoderArgs {
  std::string encoding = "hash";
  int levels = 6;
  int features = 8;
  int table_log2 = 12;
  int n0 = 16;
  int nmax = 512;
  int frequencies = 10;
  int bins = 64;
  float sigma = 0.0f;
  int hidden_layers = 2;
  int hidden_width = 64;
};

const char* const kEncoderFlags[] = {"--encoding", "--levels",      "--features",     "--table-log2",
                                     "--n0",       "--nmax",        "--frequencies",  "--bins",
                                     "--sigma",    "--hidden-layers", "--hidden-width"};

void add_hash_args(CLI::App* sub, EncoderArgs& a) {
  sub->add_option("--levels", a.levels, "Hash grid levels L");
  sub->add_option("--features", a.features, "Features per table entry W");
  sub->add_option("--table-log2", a.table_log2, "log2 of entries per level table T");
  sub->add_option("--n0", a.n0, "Coarsest grid resolution");
  sub->add_option("--nmax", a.nmax, "Finest grid resolution");
}

void add_baseline_args(CLI::App* sub, EncoderArgs& a) {
  sub->add_option("--frequencies", a.frequencies, "Highest octave M for frequency/triangle encodings");
  sub->add_option("--bins", a.bins, "One-blob bins k");
  sub->add_option("--sigma", a.sigma, "One-blob kernel width (0 = 1/k)");
}

void add_encoder_args(CLI::App* sub, EncoderArgs& a) {
  sub->add_option("--encoding", a.encoding, "hash|identity|frequency|triangle|oneblob");
  add_hash_args(sub, a);
  add_baseline_args(sub, a);
  sub->add_option("--hidden-layers", a.hidden_layers, "MLP hidden layers");
  sub->add_option("--hidden-width", a.hidden_width, "MLP hidden width");
}

HashConfig hash_config(const EncoderArgs& a) {
  if (a.table_log2 < 1 || a.table_log2 > 30) throw InputError("--table-log2 must be in [1, 30]");
  HashConfig h;
  h.levels = a.levels;
  h.features = a.features;
  h.table_size = 1u << a.table_log2;
  h.n0 = a.n0;
  h.nmax = a.nmax;
  h.validate();
  return h;
}

BaselineEncoding baseline_config(const EncoderArgs& a, BaselineScheme scheme) {
  BaselineEncoding b;
  b.scheme = scheme;
  b.frequencies = a.frequencies;
  b.bins = a.bins;
  b.sigma = a.sigma;
  b.validate();
  return b;
}

ModelSpec model_spec(const EncoderArgs& a) {
  ModelSpec spec = a.encoding == "hash"
                       ? ModelSpec::hash(hash_config(a), a.hidden_layers, a.hidden_width)
                       : ModelSpec::baseline(baseline_config(a, parse_baseline_scheme(a.encoding)), a.hidden_layers,
                                             a.hidden_width);
  spec.validate();
  return spec;
}

struct TrainArgs {
  int epochs = 50;
  int batch_log2 = 14;
  float lambda_grad = 0.0f;
  bool grad_loss = false;
  std::string precision = "mixed16";
  float lr_tables = AdamConfig{}.lr_tables;
  float lr_mlp = AdamConfig{}.lr_mlp;
  float lr_decay = AdamConfig{}.lr_decay;
  float clip_norm = AdamConfig{}.clip_norm;
};

void add_train_args(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--epochs", a.epochs, "Passes over every voxel");
  sub->add_option("--batch-log2", a.batch_log2, "log2 of the batch size");
  sub->add_option("--lambda-grad", a.lambda_grad, "Weight of the gradient MSE loss term");
  sub->add_flag("--grad-loss", a.grad_loss, "Enable the gradient loss at the default weight 0.05");
  sub->add_option("--precision", a.precision, "full32|mixed16");
  sub->add_option("--lr-tables", a.lr_tables, "Adam step size for hash tables");
  sub->add_option("--lr-mlp", a.lr_mlp, "Adam step size for MLP weights");
  sub->add_option("--lr-decay", a.lr_decay, "Per-epoch learning-rate multiplier");
  sub->add_option("--clip-norm", a.clip_norm, "Global gradient-norm clip (0 = off)");
}

TrainConfig train_config(const TrainArgs& a, const CLI::App* sub) {
  if (a.batch_log2 < 0 || a.batch_log2 > 30) throw InputError("--batch-log2 must be in [0, 30]");
  if (a.epochs < 0) throw InputError("--epochs must be >= 0");
  if (!(a.lambda_grad >= 0.0f)) throw InputError("--lambda-grad must be >= 0");
  TrainConfig c;
  c.epochs = a.epochs;
  c.batch_size = std::size_t{1} << a.batch_log2;
  c.lambda_grad = a.grad_loss && sub->count("--lambda-grad") == 0 ? kDefaultGradLambda : a.lambda_grad;
  c.precision = parse_precision(a.precision);
  c.adam.lr_tables = a.lr_tables;
  c.adam.lr_mlp = a.lr_mlp;
  c.adam.lr_decay = a.lr_decay;
  c.adam.clip_norm = a.clip_norm;
  return c;
}

struct RunArgs {
  std::uint64_t seed = 0;
  int threads = 1;
  bool deterministic = false;
  bool verbose = false;

  int effective_threads() const { return deterministic ? 1 : std::max(1, threads); }
};

void add_run_args(CLI::App* sub, RunArgs& a) {
  sub->add_option("--seed", a.seed, "Seed for every random choice");
  sub->add_option("--threads", a.threads, "Worker threads (rendering)");
  sub->add_flag("--deterministic", a.deterministic, "Force single-threaded, reproducible execution");
  sub->add_flag("-v,--verbose", a.verbose, "Per-epoch progress");
}

Vec3 parse_vec3(const std::string& text) {
  std::array<double, 3> v{};
  std::istringstream in(text);
  std::string part;
  int n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) throw InputError("expected x,y,z, got '" + text + "'");
    try {
      std::size_t used = 0;
      v[static_cast<std::size_t>(n)] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw InputError("expected x,y,z, got '" + text + "'");
    }
    ++n;
  }
  if (n != 3) throw InputError("expected x,y,z, got '" + text + "'");
  return v;
}

bool looks_like_nvrc(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  return in.gcount() == 4 && magic == kNvrcMagic;
}

// Every option's effective value, defaults included.
std::map<std::string, std::string> resolved_config(const CLI::App* sub) {
  std::map<std::string, std::string> cfg;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const bool flag = opt->get_expected_max() == 0;
    if (flag) {
      cfg[name] = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      std::string joined;
      for (std::size_t i = 0; i < r.size(); ++i) joined += (i ? "," : "") + r[i];
      cfg[name] = joined;
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

class Context {
 public:
  Context(std::string command, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err)
      : out(out), err(err), start_(Clock::now()) {
    manifest_.command = std::move(command);
    manifest_.argv = argv;
  }

  RunManifest& manifest() { return manifest_; }

  void finish(const CLI::App* sub, std::uint64_t seed, const fs::path& primary_output) {
    manifest_.config = resolved_config(sub);
    manifest_.seed = seed;
    manifest_.wall_time = seconds_since(start_);
    const fs::path path = manifest_path_for(primary_output);
    manifest_.write(path);
  }

  std::ostream& out;
  std::ostream& err;

 private:
  RunManifest manifest_;
  Clock::time_point start_;
};

struct CompressArgs {
  std::string input;
  std::string output;
  std::string report;
  std::string init;
  VolumeArgs volume;
  EncoderArgs encoder;
  TrainArgs train;
  RunArgs run;
};

void cmd_compress(const CompressArgs& a, const CLI::App* sub, Context& ctx) {
  const RawDescriptor desc = resolve_descriptor(a.input, a.volume, sub);
  const Volume v = load_raw(a.input, desc.dims, desc.dtype);
  ctx.manifest().add_input(a.input);

  TrainConfig cfg = train_config(a.train, sub);
  cfg.seed = a.run.seed;
  ModelSpec spec;
  std::vector<float> initial;
  if (!a.init.empty()) {
    Model init = read_model(a.init);
    ctx.manifest().add_input(a.init);
    const bool explicit_shape = std::any_of(std::begin(kEncoderFlags), std::end(kEncoderFlags),
                                            [&](const char* f) { return sub->count(f) > 0; });
    if (explicit_shape && !(model_spec(a.encoder) == init.spec)) {
      throw InputError("encoder/MLP flags disagree with the shape stored in '" + a.init + "'");
    }
    spec = init.spec;
    initial = std::move(init.params);
  } else {
    spec = model_spec(a.encoder);
    initial = init_params(spec, cfg.seed);
  }

  Trainer trainer(v, spec, std::move(initial), cfg);
  for (int e = 0; e < cfg.epochs; ++e) {
    const EpochRecord& rec = trainer.run_epoch();
    if (a.run.verbose) {
      ctx.err << "epoch " << rec.epoch << "  loss " << fmt("%.3e", rec.loss) << "  psnr "
              << format_psnr(rec.psnr) << " dB\n";
    }
  }
  TrainReport report = trainer.train();  // epochs already run; finalizes totals
  Model model = trainer.model();

  const std::uint64_t bytes = write_model(a.output, model, cfg.precision);
  const fs::path report_path = a.report.empty() ? fs::path(a.output + ".csv") : fs::path(a.report);
  report.write_csv(report_path);

  const Volume decoded = decode_volume(model, v.dims);
  const double p = psnr(v, decoded);
  const double cr = compression_ratio(v, bytes);
  ctx.out << "PSNR " << format_psnr(p) << " dB  CR " << fmt("%.2f", cr) << ":1  TC " << fmt("%.2f", report.seconds)
          << " s  (" << bytes << " bytes, " << spec.param_count() << " parameters)\n";

  ctx.manifest().outputs = {a.output, report_path.string()};
  ctx.finish(sub, cfg.seed, a.output);
}

struct DecompressArgs {
  std::string input;
  std::string output;
  std::string format = "f32";
  RunArgs run;
};

void cmd_decompress(const DecompressArgs& a, const CLI::App* sub, Context& ctx) {
  const Model model = read_model(a.input);
  ctx.manifest().add_input(a.input);
  const Volume decoded = decode_volume(model, model.dims);

  RawDescriptor desc{model.dims, {DtypeKind::kF32, Endian::kLittle}};
  if (a.format == "normalized") {
    write_raw(a.output, std::vector<double>(decoded.data.begin(), decoded.data.end()), desc.dtype);
  } else {
    if (a.format == "source") desc.dtype = model.source_dtype;
    else if (a.format != "f32") throw InputError("--format must be f32|source|normalized");
    Volume ranged = decoded;
    ranged.vmin = model.vmin;
    ranged.vmax = model.vmax;
    std::vector<double> values(decoded.data.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = ranged.denormalize(decoded.data[i]);
    write_raw(a.output, values, desc.dtype);
  }
  write_descriptor(a.output, desc);
  ctx.out << "wrote " << to_string(model.dims) << " " << to_string(desc.dtype.kind) << " to " << a.output << "\n";
  ctx.manifest().outputs = {a.output, a.output + ".desc"};
  ctx.finish(sub, a.run.seed, a.output);
}

struct EvalArgs {
  std::string model;
  std::string volume;
  std::string output;
  bool normalized = false;
  bool key_values = false;
  double tc = 0.0;
  VolumeArgs vargs;
  RunArgs run;
};

void cmd_eval(const EvalArgs& a, const CLI::App* sub, Context& ctx) {
  const Model model = read_model(a.model);
  ctx.manifest().add_input(a.model);

  RawDescriptor desc{model.dims, model.source_dtype};
  const bool has_sidecar = fs::exists(a.volume + ".desc");
  if (!a.vargs.dims.empty() || !a.vargs.desc.empty() || has_sidecar) {
    desc = resolve_descriptor(a.volume, a.vargs, sub);
  } else if (a.normalized) {
    desc.dtype = {DtypeKind::kF32, Endian::kLittle};
  }
  if (!(desc.dims == model.dims)) {
    throw InputError("ground truth is " + to_string(desc.dims) + " but the model encodes " + to_string(model.dims));
  }
  const auto raw = read_raw_values(a.volume, desc.dims, desc.dtype);
  ctx.manifest().add_input(a.volume);
  const Volume truth =
      a.normalized ? normalize_with_range(desc.dims, raw, 0.0f, 1.0f) : normalize_with_range(desc.dims, raw, model.vmin, model.vmax);

  const Volume decoded = decode_volume(model, model.dims);
  const std::uint64_t bytes = fs::file_size(a.model);
  const QualityReport r = evaluate_quality(truth, decoded, bytes, a.tc);
  const std::string text = a.key_values ? format_key_values(r) : format_table(r);
  ctx.out << text;

  const fs::path out_path = a.output.empty() ? fs::path(a.model + ".eval.txt") : fs::path(a.output);
  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + out_path.string() + "'");
  f << format_key_values(r);
  ctx.manifest().outputs = {out_path.string()};
  ctx.finish(sub, a.run.seed, out_path);
}

struct CompareArgs {
  std::string input;
  std::string output;
  bool synthetic = false;
  std::string synthetic_dims = "64,64,64";
  double noise = 0.15;
  int baseline_layers = 12;
  std::string schemes = "frequency,triangle,oneblob,identity";
  double tolerance = 0.05;
  VolumeArgs volume;
  EncoderArgs encoder;
  TrainArgs train;
  RunArgs run;
};

void cmd_compare(const CompareArgs& a, const CLI::App* sub, Context& ctx) {
  Volume v;
  if (a.synthetic) {
    SyntheticOptions so;
    so.dims = parse_dims(a.synthetic_dims);
    so.noise_amplitude = a.noise;
    so.seed = a.run.seed;
    v = make_blob_volume(so);
  } else {
    if (a.input.empty()) throw InputError("give a volume or --synthetic");
    const RawDescriptor desc = resolve_descriptor(a.input, a.volume, sub);
    v = load_raw(a.input, desc.dims, desc.dtype);
    ctx.manifest().add_input(a.input);
  }

  CompareOptions opts;
  opts.hash = hash_config(a.encoder);
  opts.hash_hidden_layers = a.encoder.hidden_layers;
  opts.hash_hidden_width = a.encoder.hidden_width;
  opts.baseline_layers = a.baseline_layers;
  opts.baseline = baseline_config(a.encoder, BaselineScheme::kIdentity);
  opts.tolerance = a.tolerance;
  opts.schemes.clear();
  std::istringstream in(a.schemes);
  for (std::string s; std::getline(in, s, ',');) {
    if (!s.empty()) opts.schemes.push_back(parse_baseline_scheme(s));
  }
  opts.train = train_config(a.train, sub);
  opts.train.seed = a.run.seed;

  for (const auto& [name, spec] : comparison_specs(opts)) {
    ctx.out << name << ": " << spec.param_count() << " parameters (" << spec.mlp.hidden_layers << "x"
            << spec.mlp.hidden_width << " MLP)\n";
  }
  const auto rows = compare_encodings(v, opts, [&](const CompareRow& r) {
    ctx.out << r.scheme << "  PSNR " << format_psnr(r.psnr) << " dB  SSIM " << fmt("%.4f", r.ssim) << "  TC "
            << fmt("%.2f", r.seconds) << " s\n";
  });
  std::ofstream f(a.output, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + a.output + "'");
  f << compare_csv(rows);
  ctx.manifest().outputs = {a.output};
  ctx.finish(sub, a.run.seed, a.output);
}

struct MetaArgs {
  std::string task_dir;
  std::string output;
  int outer = 100;
  float epsilon = 0.1f;
  bool anneal = false;
  std::size_t inner_steps = 0;
  VolumeArgs volume;
  EncoderArgs encoder;
  TrainArgs train;
  RunArgs run;
};

void cmd_meta_train(const MetaArgs& a, const CLI::App* sub, Context& ctx) {
  if (!fs::is_directory(a.task_dir)) throw InputError("'" + a.task_dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.task_dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && ext != ".desc" && ext != ".json" && ext != ".csv") files.push_back(e.path());
  }
  if (files.empty()) throw InputError("no task volumes in '" + a.task_dir + "'");
  std::sort(files.begin(), files.end());

  std::vector<Volume> tasks;
  for (const auto& p : files) {
    const RawDescriptor desc = resolve_descriptor(p, a.volume, sub);
    tasks.push_back(load_raw(p, desc.dims, desc.dtype));
    ctx.manifest().add_input(p);
  }

  const ModelSpec spec = model_spec(a.encoder);
  MetaConfig cfg;
  cfg.outer_iterations = a.outer;
  cfg.epsilon = a.epsilon;
  cfg.anneal_epsilon = a.anneal;
  cfg.inner_steps = a.inner_steps;
  cfg.inner = train_config(a.train, sub);
  cfg.seed = a.run.seed;
  const auto t0 = Clock::now();
  const auto observer = [&](int it, std::size_t task, const Trainer&) {
    if (a.run.verbose) ctx.err << "outer " << it << "  task " << files[task].filename().string() << "\n";
  };
  auto theta = reptile(tasks, spec, cfg, {}, observer);

  Model m;
  m.spec = spec;
  m.params = std::move(theta);
  m.dims = tasks.front().dims;
  m.vmin = 0.0f;
  m.vmax = 1.0f;
  m.source_dtype = {DtypeKind::kF32, Endian::kLittle};
  m.precision = cfg.inner.precision;
  m.meta_init = true;
  const auto bytes = write_model(a.output, m, m.precision);
  ctx.out << "meta-init from " << tasks.size() << " tasks, " << cfg.outer_iterations << " outer iterations, "
          << bytes << " bytes, " << fmt("%.2f", seconds_since(t0)) << " s\n";
  ctx.manifest().outputs = {a.output};
  ctx.finish(sub, a.run.seed, a.output);
}

struct RenderArgs {
  std::string input;
  std::string output;
  std::string tf;
  std::string eye = "2,1.5,2.5";
  std::string look_at = "0.5,0.5,0.5";
  std::string up = "0,1,0";
  double fov = Camera{}.fov_y * 180.0 / std::numbers::pi;
  int width = 256;
  int height = 256;
  double step = 0.0;
  double reference_step = 0.0;
  double termination = 0.99;
  bool shading = false;
  VolumeArgs volume;
  RunArgs run;
};

void cmd_render(const RenderArgs& a, const CLI::App* sub, Context& ctx) {
  Camera cam;
  cam.eye = parse_vec3(a.eye);
  cam.look_at = parse_vec3(a.look_at);
  cam.up = parse_vec3(a.up);
  cam.fov_y = a.fov * std::numbers::pi / 180.0;
  cam.width = a.width;
  cam.height = a.height;
  cam.validate();
  const TransferFunction tf = a.tf.empty() ? TransferFunction::ramp() : TransferFunction::load(a.tf);
  if (!a.tf.empty()) ctx.manifest().add_input(a.tf);

  RenderOptions opts;
  opts.step = a.step;
  opts.reference_step = a.reference_step;
  opts.termination = a.termination;
  opts.threads = a.run.effective_threads();
  opts.shading = a.shading;

  Image img;
  ctx.manifest().add_input(a.input);
  if (looks_like_nvrc(a.input)) {
    const Model model = read_model(a.input);
    img = raymarch(FieldSource(model), cam, tf, opts);
  } else {
    const RawDescriptor desc = resolve_descriptor(a.input, a.volume, sub);
    const Volume v = load_raw(a.input, desc.dims, desc.dtype);
    img = raymarch(FieldSource(v), cam, tf, opts);
  }
  write_image(img, a.output);
  ctx.out << "wrote " << img.width << "x" << img.height << " image to " << a.output << "\n";
  ctx.manifest().outputs = {a.output};
  ctx.finish(sub, a.run.seed, a.output);
}

struct SynthArgs {
  std::string output;
  std::string dims = "64,64,64";
  int blobs = 3;
  double noise = 0.0;
  double sigma_min = SyntheticOptions{}.sigma_min;
  double sigma_max = SyntheticOptions{}.sigma_max;
  std::string dtype = "f32";
  RunArgs run;
};

void cmd_synth(const SynthArgs& a, const CLI::App* sub, Context& ctx) {
  SyntheticOptions so;
  so.dims = parse_dims(a.dims);
  so.blob_count = a.blobs;
  so.noise_amplitude = a.noise;
  so.sigma_min = a.sigma_min;
  so.sigma_max = a.sigma_max;
  so.seed = a.run.seed;
  const Volume v = make_blob_volume(so);
  const ScalarDtype dtype{parse_dtype(a.dtype), Endian::kLittle};
  double scale = 1.0;
  switch (dtype.kind) {
    case DtypeKind::kU8: scale = 255.0; break;
    case DtypeKind::kU16: scale = 65535.0; break;
    case DtypeKind::kI16: scale = 32767.0; break;
    case DtypeKind::kI32: scale = 1.0e6; break;
    case DtypeKind::kF32: break;
  }
  std::vector<double> values(v.data.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = v.data[i] * scale;
  write_raw(a.output, values, dtype);
  write_descriptor(a.output, {v.dims, dtype});
  ctx.out << "wrote " << to_string(v.dims) << " " << to_string(dtype.kind) << " to " << a.output << "\n";
  ctx.manifest().outputs = {a.output, a.output + ".desc"};
  ctx.finish(sub, a.run.seed, a.output);
}

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", "key=value file of long option names; command-line flags take precedence");
  return sub;
}

// Splices `--config FILE` entries into the argument list ahead of the
// command-line flags, skipping keys the command line sets itself.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config.empty()) return args;
  if (rest.size() < 2) throw InputError("--config needs a command");

  std::ifstream in(config);
  if (!in) throw IoError("cannot open config '" + config + "'");
  const auto given = [&](const std::string& flag) {
    return std::any_of(rest.begin(), rest.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> injected;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(config + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const auto strip = [](std::string t) {
      const auto b = t.find_first_not_of(" \t\r");
      const auto e = t.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (key.empty() || given(flag)) continue;
    if (value == "true") {
      injected.push_back(flag);
    } else if (value != "false") {
      injected.push_back(flag + "=" + value);
    }
  }
  std::vector<std::string> out(rest.begin(), rest.begin() + 2);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural volume compression with multi-resolution hash encodings", "nvrc"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  CompressArgs compress;
  auto* c = add_command(app, "compress", "Train a network on a raw volume and write an .nvrc file");
  c->add_option("input", compress.input, "Raw volume")->required();
  c->add_option("-o,--output", compress.output, "Output .nvrc")->required();
  c->add_option("--report", compress.report, "Per-epoch CSV (default <output>.csv)");
  c->add_option("--init", compress.init, "Start from the parameters of this .nvrc (e.g. a meta-init)");
  add_volume_args(c, compress.volume);
  add_encoder_args(c, compress.encoder);
  add_train_args(c, compress.train);
  add_run_args(c, compress.run);

  DecompressArgs decompress;
  auto* d = add_command(app, "decompress", "Decode an .nvrc file to a raw volume");
  d->add_option("input", decompress.input, "Model file")->required();
  d->add_option("-o,--output", decompress.output, "Output raw volume")->required();
  d->add_option("--format", decompress.format, "f32 (original range) | source (original dtype) | normalized");
  add_run_args(d, decompress.run);

  EvalArgs eval;
  auto* e = add_command(app, "eval", "Score a model against ground truth");
  e->add_option("model", eval.model, "Model file")->required();
  e->add_option("-g,--volume", eval.volume, "Ground-truth raw volume")->required();
  e->add_option("-o,--output", eval.output, "key=value report (default <model>.eval.txt)");
  e->add_flag("--normalized", eval.normalized, "Ground truth is already normalized f32");
  e->add_flag("--kv", eval.key_values, "Print key=value lines instead of a table");
  e->add_option("--tc", eval.tc, "Time to compress to report, seconds");
  add_volume_args(e, eval.vargs);
  add_run_args(e, eval.run);

  CompareArgs compare;
  auto* ce = add_command(app, "compare-encodings", "Train each input encoding at a matched parameter budget");
  ce->add_option("input", compare.input, "Raw volume (omit with --synthetic)");
  ce->add_option("-o,--output", compare.output, "Results CSV")->required();
  ce->add_flag("--synthetic", compare.synthetic, "Use a seeded Gaussian-blob volume");
  ce->add_option("--synthetic-dims", compare.synthetic_dims, "Grid of the synthetic volume");
  ce->add_option("--noise", compare.noise, "Band-limited noise amplitude of the synthetic volume");
  ce->add_option("--baseline-layers", compare.baseline_layers, "Hidden layers of the baseline MLPs");
  ce->add_option("--schemes", compare.schemes, "Comma-separated baseline encodings");
  ce->add_option("--tolerance", compare.tolerance, "Allowed relative parameter-budget mismatch");
  add_volume_args(ce, compare.volume);
  add_hash_args(ce, compare.encoder);
  add_baseline_args(ce, compare.encoder);
  ce->add_option("--hidden-layers", compare.encoder.hidden_layers, "Hash model MLP hidden layers");
  ce->add_option("--hidden-width", compare.encoder.hidden_width, "Hash model MLP hidden width");
  add_train_args(ce, compare.train);
  add_run_args(ce, compare.run);

  MetaArgs meta;
  auto* m = add_command(app, "meta-train", "Learn an initialization over a directory of task volumes (Reptile)");
  m->add_option("tasks", meta.task_dir, "Directory of raw volumes with .desc sidecars")->required();
  m->add_option("-o,--output", meta.output, "Output meta-init .nvrc")->required();
  m->add_option("--outer", meta.outer, "Outer iterations");
  m->add_option("--epsilon", meta.epsilon, "Outer step size");
  m->add_flag("--anneal", meta.anneal, "Decay epsilon linearly to 0");
  m->add_option("--inner-steps", meta.inner_steps, "Inner updates per task (0 = one full pass)");
  add_volume_args(m, meta.volume);
  add_encoder_args(m, meta.encoder);
  add_train_args(m, meta.train);
  add_run_args(m, meta.run);

  RenderArgs render;
  auto* r = add_command(app, "render", "Ray-march a model or raw volume to a PPM image");
  r->add_option("input", render.input, ".nvrc model or raw volume")->required();
  r->add_option("-o,--output", render.output, "Output .ppm")->required();
  r->add_option("--tf", render.tf, "Transfer function file (lines of: scalar r g b a)");
  r->add_option("--eye", render.eye, "Camera position x,y,z");
  r->add_option("--look-at", render.look_at, "Camera target x,y,z");
  r->add_option("--up", render.up, "Camera up vector x,y,z");
  r->add_option("--fov", render.fov, "Vertical field of view, degrees");
  r->add_option("--width", render.width, "Image width");
  r->add_option("--height", render.height, "Image height");
  r->add_option("--step", render.step, "Sample spacing (0 = half a voxel)");
  r->add_option("--reference-step", render.reference_step, "Opacity reference spacing (0 = one voxel)");
  r->add_option("--termination", render.termination, "Early ray termination opacity");
  r->add_flag("--shading", render.shading, "Headlight diffuse shading from field gradients");
  add_volume_args(r, render.volume);
  add_run_args(r, render.run);

  SynthArgs synth;
  auto* s = add_command(app, "synth", "Write a seeded Gaussian-blob test volume");
  s->add_option("-o,--output", synth.output, "Output raw volume")->required();
  s->add_option("--dims", synth.dims, "Grid X,Y,Z");
  s->add_option("--blobs", synth.blobs, "Number of Gaussian blobs");
  s->add_option("--noise", synth.noise, "Band-limited noise amplitude");
  s->add_option("--sigma-min", synth.sigma_min, "Smallest blob width");
  s->add_option("--sigma-max", synth.sigma_max, "Largest blob width");
  s->add_option("--dtype", synth.dtype, "Sample type (values scaled to the type's range)");
  add_run_args(s, synth.run);

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const std::runtime_error& ex) {
    err << "nvrc: " << ex.what() << "\n";
    return kExitUsage;
  }
  std::vector<const char*> argv;
  argv.reserve(expanded.size());
  for (const auto& a : expanded) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "nvrc: " << ex.what() << "\n";
    return kExitUsage;
  }

  const std::vector<std::string> argv_copy(args.begin(), args.end());
  try {
    CLI::App* sub = app.get_subcommands().front();
    Context ctx(sub->get_name(), argv_copy, out, err);
    if (sub == c) cmd_compress(compress, sub, ctx);
    else if (sub == d) cmd_decompress(decompress, sub, ctx);
    else if (sub == e) cmd_eval(eval, sub, ctx);
    else if (sub == ce) cmd_compare(compare, sub, ctx);
    else if (sub == m) cmd_meta_train(meta, sub, ctx);
    else if (sub == r) cmd_render(render, sub, ctx);
    else if (sub == s) cmd_synth(synth, sub, ctx);
  } catch (const CodecError& ex) {
    err << "nvrc: corrupt file: " << ex.what() << " (" << to_string(ex.code()) << ")\n";
    return kExitCorrupt;
  } catch (const NumericalError& ex) {
    err << "nvrc: numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const InputError& ex) {
    err << "nvrc: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const IoError& ex) {
    err << "nvrc: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "nvrc: internal error: " << ex.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace nvr::cli
