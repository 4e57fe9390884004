// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// mvdit command line: gen-data, train, sample, eval, inspect-attn.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mvdit/eval/suite.hpp"
#include "mvdit/io/checkpoint.hpp"
#include "mvdit/io/run_config.hpp"

namespace fs = std::filesystem;
using namespace mvdit;

namespace {

// Failure with a category for the error line and exit code.
struct CommandError : std::runtime_error {
  CommandError(std::string cat, const std::string& what) : std::runtime_error(what), category(std::move(cat)) {}
  std::string category;
};

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.path, "key=value run configuration file");
  cmd->add_option("--set", a.overrides, "override one config entry, key=value (repeatable)");
}

io::RunConfig load_run_config(const ConfigArgs& a) {
  io::RunConfig c = a.path.empty() ? io::RunConfig{} : io::load_config(a.path);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw io::ConfigError("--set expects key=value, got '" + kv + "'");
    io::set_config_value(c, io::detail::trim(kv.substr(0, eq)), io::detail::trim(kv.substr(eq + 1)));
  }
  c.validate();
  return c;
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::vector<std::int64_t> parse_ids(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok = io::detail::trim(tok);
    if (tok.empty()) continue;
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) throw CommandError("usage", "bad token id '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<toydata::MotionKind> parse_kinds(const std::string& text) {
  if (text.empty() || text == "all") return {toydata::kAllKinds.begin(), toydata::kAllKinds.end()};
  std::vector<toydata::MotionKind> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    auto it = std::find_if(toydata::kAllKinds.begin(), toydata::kAllKinds.end(),
                           [&](auto k) { return toydata::kind_name(k) == tok; });
    if (it == toydata::kAllKinds.end()) throw CommandError("usage", "unknown motion kind '" + tok + "'");
    out.push_back(*it);
  }
  return out;
}

void parse_size(const std::string& text, io::RunConfig& c) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) {
      c.data.height = c.data.width = std::stoll(text);
    } else {
      c.data.height = std::stoll(text.substr(0, x));
      c.data.width = std::stoll(text.substr(x + 1));
    }
  } catch (const std::logic_error&) {
    throw CommandError("usage", "--size expects N or HxW, got '" + text + "'");
  }
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
  ConfigArgs cfg;
  std::string out, kinds, size;
  std::optional<std::int64_t> count, frames;
  std::optional<std::uint64_t> seed;
};

int cmd_gen_data(const GenDataArgs& a) {
  auto c = load_run_config(a.cfg);
  if (a.count) c.data.count = *a.count;
  if (a.frames) c.data.frames = *a.frames;
  if (a.seed) c.seed = *a.seed;
  if (!a.size.empty()) parse_size(a.size, c);
  c.validate();
  const auto kinds = parse_kinds(a.kinds);
  const auto out = a.out.empty() ? c.dataset : a.out;
  const toydata::ClipGeometry g{c.data.frames, c.data.height, c.data.width, static_cast<int>(c.data.fps)};

  std::vector<toydata::DatasetRecord> records;
  records.reserve(static_cast<std::size_t>(c.data.count));
  for (std::int64_t i = 0; i < c.data.count; ++i)
    records.push_back(toydata::make_record(kinds[static_cast<std::size_t>(i) % kinds.size()],
                                           toydata::record_seed(c.seed, static_cast<std::uint64_t>(i)), g,
                                           c.model.stride));
  ensure_parent(out);
  toydata::write_dataset(records, out);

  std::map<std::string, int> per_kind;
  for (const auto& r : records) ++per_kind[std::string(toydata::kind_name(r.kind))];
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
  std::cout << "frames=" << c.data.frames << " size=" << c.data.height << "x" << c.data.width << " fps=" << c.data.fps
            << " video_tokens_per_clip="
            << video::video_token_count(c.data.frames, c.data.height, c.data.width, c.model.stride)
            << " motion_tokens_per_clip=" << motion::motion_token_count(c.data.frames)
            << " motion_tokens_per_frame=" << motion::kTokensPerFrame << "\n";
  std::cout << "kinds:";
  for (const auto& [k, n] : per_kind) std::cout << " " << k << "=" << n;
  std::cout << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  ConfigArgs cfg;
  std::string phase = "all";
  bool resume = false;
  bool skip_phase1 = false;
  std::optional<std::int64_t> stop_after;
};

std::uint64_t init_seed(const io::RunConfig& c) { return derive_seed(c.seed, 0x1417); }

const char* kMetricsFile = "train_metrics.csv";

int cmd_train(const TrainArgs& a) {
  const auto c = load_run_config(a.cfg);
  if (a.phase != "1" && a.phase != "2" && a.phase != "all") throw CommandError("usage", "--phase must be 1, 2 or all");
  if (a.skip_phase1 && a.phase == "1") throw CommandError("usage", "--skip-phase1 contradicts --phase 1");
  std::vector<int> phases;
  if (a.phase != "2" && !a.skip_phase1) phases.push_back(1);
  if (a.phase != "1") phases.push_back(2);

  const auto records = toydata::read_dataset(c.dataset);
  if (records.empty()) throw CommandError("data", "dataset " + c.dataset + " is empty");
  for (const auto& r : records)
    if (r.video.height % c.model.stride || r.video.width % c.model.stride || r.motion.frame_count() % 4 != 1)
      throw CommandError("data", "dataset geometry does not fit the model stride");

  std::unique_ptr<model::DualDiT<float>> net;
  io::CheckpointInfo info;
  std::optional<io::OptimizerSnapshot<float>> saved_opt;
  auto load = [&] {
    auto ck = io::load_checkpoint<float>(c.checkpoint);
    if (!(ck.model->config() == c.model)) throw CommandError("checkpoint", "checkpoint model config differs from the run config");
    net = std::move(ck.model);
    info = ck.info;
    saved_opt = std::move(ck.optimizer);
  };
  if (a.resume) {
    if (!fs::exists(c.checkpoint)) throw CommandError("checkpoint", "--resume but no checkpoint at " + c.checkpoint);
    load();
  } else if (phases.front() == 2 && !a.skip_phase1) {
    if (!fs::exists(c.checkpoint))
      throw CommandError("checkpoint", "phase 2 needs a phase-1 checkpoint at " + c.checkpoint +
                                           " (train --phase 1 first, or pass --skip-phase1)");
    load();
    if (info.completed_phase < 1)
      throw CommandError("checkpoint", "checkpoint at " + c.checkpoint + " has not finished phase 1");
    saved_opt.reset();
    info.active_phase = 0;
  }
  if (!net) {
    net = std::make_unique<model::DualDiT<float>>(c.model, init_seed(c));
    info = {};
    info.stats = toydata::dataset_stats(records);
    if (a.skip_phase1) {
      net->copy_video_stream_to_motion();
      info.extra["skip_phase1"] = true;
    }
  }
  const std::string tag = info.extra.value("skip_phase1", false) ? "skip-phase1" : "";

  fs::create_directories(c.metrics_dir);
  ensure_parent(c.checkpoint);
  const auto metrics_path = (fs::path(c.metrics_dir) / kMetricsFile).string();
  if (!a.resume && (phases.front() == 1 || a.skip_phase1)) fs::remove(metrics_path);
  fs::path config_copy = fs::path(c.metrics_dir) / "run_config.txt";
  std::ofstream(config_copy) << io::config_to_text(c);

  auto examples = toydata::to_train_examples(records, info.stats, c.model.stride, static_cast<std::size_t>(c.model.text_len));
  training::TrainPlan plan = c.train;
  plan.seed = c.seed;
  std::int64_t budget = a.stop_after.value_or(-1);
  for (int phase_no : phases) {
    if (budget == 0) break;
    if (info.completed_phase >= phase_no) {
      std::cout << "phase " << phase_no << " already complete in " << c.checkpoint << "\n";
      continue;
    }
    const auto phase = static_cast<training::Phase>(phase_no);
    auto data = examples;
    if (phase == training::Phase::MotionOnly)
      for (auto& e : data) e = training::motion_only(std::move(e));
    training::Trainer<float> trainer(*net, data, plan, phase, phase == training::Phase::MultiTask ? tag : "");
    if (info.active_phase == phase_no) {
      if (!saved_opt) throw CommandError("checkpoint", "checkpoint lacks optimizer state for the active phase");
      io::restore_optimizer(trainer.optimizer(), *net, phase, *saved_opt);
      trainer.set_step_index(info.step);
      std::cout << "resuming phase " << phase_no << " at step " << info.step << "\n";
    }
    info.active_phase = phase_no;
    const auto total = phase == training::Phase::MotionOnly ? plan.phase1_steps : plan.phase2_steps;
    double window = 0;
    std::int64_t in_window = 0;
    while (trainer.step_index() < total && budget != 0) {
      const auto row = trainer.step();
      if (!std::isfinite(row.loss)) throw CommandError("train", "loss became non-finite at step " + std::to_string(row.step));
      std::ostringstream loss, ms;
      loss << std::setprecision(9) << row.loss;
      ms << std::fixed << std::setprecision(3) << row.wall_ms;
      eval::append_csv(metrics_path, {"step", "phase", "paradigm", "loss", "wall_ms"},
                       {std::to_string(row.step), training::phase_name(row.phase), row.paradigm, loss.str(), ms.str()});
      window += row.loss;
      ++in_window;
      info.step = trainer.step_index();
      if (budget > 0) --budget;
      if (info.step % c.checkpoint_every == 0 || info.step == total || budget == 0) {
        io::save_checkpoint(c.checkpoint, *net, info, &trainer.optimizer());
        std::cout << "phase " << phase_no << " step " << info.step << "/" << total << " mean loss "
                  << window / static_cast<double>(in_window) << "\n";
        window = 0;
        in_window = 0;
      }
    }
    if (trainer.step_index() < total) {
      std::cout << "stopped in phase " << phase_no << " at step " << info.step << "; continue with --resume\n";
      break;
    }
    info.completed_phase = phase_no;
    info.active_phase = 0;
    info.step = 0;
    saved_opt.reset();
    io::save_checkpoint(c.checkpoint, *net, info);
    std::cout << "phase " << phase_no << " complete, checkpoint " << c.checkpoint << "\n";
  }
  return 0;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  ConfigArgs cfg;
  std::string ckpt, mode, prompt, cond, out = "sample";
  std::int64_t clip = 0;
  std::optional<std::uint64_t> seed;
  bool allow_untrained = false;
};

TaskMode parse_mode(const std::string& m) {
  if (m == "joint") return TaskMode::Joint;
  if (m == "m2v") return TaskMode::MotionToVideo;
  if (m == "v2m") return TaskMode::VideoToMotion;
  throw CommandError("usage", "--mode must be joint, m2v or v2m");
}

void write_ppm_stream(const video::VideoClip& v, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  const auto frame = static_cast<std::size_t>(v.height * v.width * 3);
  for (std::int64_t i = 0; i < v.frames; ++i) {
    f << "P6\n" << v.width << " " << v.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(v.rgb.data() + i * frame), static_cast<std::streamsize>(frame));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

io::LoadedCheckpoint<float> open_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw CommandError("checkpoint", "no checkpoint at " + path);
  return io::load_checkpoint<float>(path);
}

int cmd_sample(const SampleArgs& a) {
  const auto c = load_run_config(a.cfg);
  const auto mode = parse_mode(a.mode);
  const bool needs_cond = mode != TaskMode::Joint;
  if (needs_cond && a.cond.empty())
    throw CommandError("sample", std::string("mode ") + a.mode + " needs --cond with the conditioning clip");
  if (!needs_cond && !a.cond.empty()) throw CommandError("sample", "joint mode takes no --cond");
  auto ck = open_checkpoint(a.ckpt.empty() ? c.checkpoint : a.ckpt);
  const auto& mc = ck.model->config();

  std::optional<toydata::DatasetRecord> cond;
  if (needs_cond) {
    auto recs = toydata::read_dataset(a.cond);
    if (a.clip < 0 || a.clip >= static_cast<std::int64_t>(recs.size()))
      throw CommandError("usage", "--clip " + std::to_string(a.clip) + " is outside " + a.cond);
    cond = recs[static_cast<std::size_t>(a.clip)];
  }

  sampling::SampleSpec spec;
  spec.mode = mode;
  spec.steps = c.sample.steps;
  spec.shift = c.sample.shift;
  spec.w1 = c.sample.w1;
  spec.w2 = c.sample.w2;
  spec.seed = a.seed.value_or(c.seed);
  spec.allow_untrained = a.allow_untrained;
  spec.grid = video::latent_geometry(c.data.frames, c.data.height, c.data.width, mc.stride);
  if (mode == TaskMode::MotionToVideo) {
    spec.grid = video::latent_geometry(cond->video.frames, cond->video.height, cond->video.width, mc.stride);
    sampling::set_motion_condition(spec, cond->motion, ck.info.stats);
  }
  if (mode == TaskMode::VideoToMotion) sampling::set_video_condition(spec, cond->video, mc.stride);
  std::vector<std::int64_t> ids;
  if (!a.prompt.empty()) ids = parse_ids(a.prompt);
  else if (cond) ids.assign(cond->caption.begin(), cond->caption.end());
  if (mode != TaskMode::VideoToMotion && !ids.empty()) {
    if (static_cast<std::int64_t>(ids.size()) > mc.text_len) throw CommandError("usage", "prompt is longer than text_len");
    for (auto id : ids)
      if (id < 0 || id >= mc.text_vocab) throw CommandError("usage", "prompt token " + std::to_string(id) + " is outside the vocabulary");
    ids.resize(static_cast<std::size_t>(mc.text_len), toydata::vocab::kPad);
    spec.text = ids;
  }

  const int fps = cond ? cond->video.fps : static_cast<int>(c.data.fps);
  auto outs = sampling::generate_clips(spec, *ck.model, ck.info.completed_phase, ck.info.stats, fps);

  toydata::DatasetRecord rec;
  rec.seed = spec.seed;
  rec.kind = cond ? cond->kind : toydata::MotionKind::Idle;
  if (!cond)
    for (auto id : ids)
      for (auto k : toydata::kAllKinds)
        if (id == toydata::action_token(k)) rec.kind = k;
  for (auto id : ids)
    if (id != toydata::vocab::kPad) rec.caption.push_back(static_cast<std::uint16_t>(id));
  rec.video = outs.video ? *outs.video : cond->video;
  rec.motion = outs.motion ? *outs.motion : cond->motion;
  ensure_parent(a.out);
  toydata::write_dataset({rec}, a.out + ".hmvd");
  if (outs.video) write_ppm_stream(*outs.video, a.out + ".ppm");

  std::cout << "mode=" << a.mode << " steps=" << spec.steps << " calls_per_step=";
  for (std::size_t i = 0; i < outs.calls_per_step.size(); ++i) std::cout << (i ? "," : "") << outs.calls_per_step[i];
  std::cout << "\nwrote " << a.out << ".hmvd" << (outs.video ? " and " + a.out + ".ppm" : "") << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  ConfigArgs cfg;
  std::string ckpt, dataset, report = "eval_report.txt";
  std::int64_t count = 20;
  std::optional<std::int64_t> steps;
  bool oracle = false;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

int cmd_eval(const EvalArgs& a) {
  const auto c = load_run_config(a.cfg);
  auto ck = open_checkpoint(a.ckpt.empty() ? c.checkpoint : a.ckpt);
  auto records = toydata::read_dataset(a.dataset.empty() ? c.dataset : a.dataset);
  if (a.count <= 0) throw CommandError("usage", "--count must be positive");
  if (static_cast<std::int64_t>(records.size()) > a.count) records.resize(static_cast<std::size_t>(a.count));
  eval::SamplerSettings s{a.steps.value_or(c.sample.steps), c.sample.shift, c.sample.w1, c.sample.w2, c.seed};
  const int phase = ck.info.completed_phase;

  eval::PoseScores pose;
  std::vector<double> jerk_mean;
  if (a.oracle) {
    for (const auto& r : records) {
      pose.mpjpe.push_back(eval::mpjpe(r.motion, r.motion));
      pose.pa_mpjpe.push_back(eval::pa_mpjpe(r.motion, r.motion));
      jerk_mean.push_back(eval::jerk(r.motion).mean);
    }
  } else {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      auto spec = eval::base_spec(TaskMode::VideoToMotion, s, eval::clip_sample_seed(s.seed, i));
      sampling::set_video_condition(spec, r.video, ck.model->config().stride);
      spec.allow_untrained = true;
      auto gen = sampling::generate_clips(spec, *ck.model, phase, ck.info.stats, r.motion.fps);
      pose.mpjpe.push_back(eval::mpjpe(*gen.motion, r.motion));
      pose.pa_mpjpe.push_back(eval::pa_mpjpe(*gen.motion, r.motion));
      jerk_mean.push_back(eval::jerk(*gen.motion).mean);
    }
  }
  eval::Metrics m;
  m["clips"] = static_cast<double>(records.size());
  m["checkpoint.phase"] = phase;
  m["v2m.mpjpe_mm.mean"] = eval::mean(pose.mpjpe);
  m["v2m.mpjpe_mm.median"] = eval::median(pose.mpjpe);
  m["v2m.pa_mpjpe_mm.mean"] = eval::mean(pose.pa_mpjpe);
  m["v2m.pa_mpjpe_mm.median"] = eval::median(pose.pa_mpjpe);
  m["v2m.jerk.mean"] = eval::mean(jerk_mean);
  if (!a.oracle) {
    auto cond = eval::tracking_scores(*ck.model, phase, records, ck.info.stats, s, true);
    auto free = eval::tracking_scores(*ck.model, phase, records, ck.info.stats, s, false);
    m["m2v.tracking_px.mean"] = cond.mean();
    m["m2v.tracking.missing_groups"] = static_cast<double>(cond.missing);
    m["joint.tracking_px.mean"] = free.mean();
    std::vector<training::TrainExample> probes;
    for (std::size_t i = 0; i < std::min<std::size_t>(records.size(), 4); ++i)
      probes.push_back(toydata::to_train_example(records[i], i, ck.info.stats, ck.model->config().stride,
                                                 static_cast<std::size_t>(ck.model->config().text_len)));
    for (const auto& [k, v] : eval::alignment_metrics(eval::attention_alignment(*ck.model, probes, c.seed))) m[k] = v;
  }
  ensure_parent(a.report);
  std::ofstream rep(a.report);
  if (!rep) throw std::runtime_error("cannot open " + a.report + " for writing");
  eval::write_key_values(rep, m);
  eval::write_key_values(std::cout, m);

  const auto csv = a.report + ".csv";
  fs::remove(csv);
  for (std::size_t i = 0; i < pose.mpjpe.size(); ++i)
    eval::append_csv(csv, {"clip", "mpjpe_mm", "pa_mpjpe_mm"}, {std::to_string(i), fmt(pose.mpjpe[i]), fmt(pose.pa_mpjpe[i])});
  return 0;
}

// ---- inspect-attn ----------------------------------------------------------

struct InspectArgs {
  ConfigArgs cfg;
  std::string ckpt, dataset, out = "attn.csv";
  std::int64_t clip = 0;
  std::int64_t layer = -1;
};

int cmd_inspect_attn(const InspectArgs& a) {
  const auto c = load_run_config(a.cfg);
  auto ck = open_checkpoint(a.ckpt.empty() ? c.checkpoint : a.ckpt);
  const auto records = toydata::read_dataset(a.dataset.empty() ? c.dataset : a.dataset);
  if (a.clip < 0 || a.clip >= static_cast<std::int64_t>(records.size()))
    throw CommandError("usage", "--clip " + std::to_string(a.clip) + " is outside the dataset");
  const auto& mc = ck.model->config();
  const auto ex = toydata::to_train_example(records[static_cast<std::size_t>(a.clip)], 0, ck.info.stats, mc.stride,
                                            static_cast<std::size_t>(mc.text_len));
  const auto caps = eval::capture_attention(*ck.model, ex, eval::kProbeTime, derive_seed(c.seed, 0, 0xa77));
  if (caps.empty()) throw CommandError("eval", "model has no dual blocks to inspect");
  const std::int64_t layer = a.layer < 0 ? caps.back().block : a.layer;
  auto it = std::find_if(caps.begin(), caps.end(), [&](const auto& cap) { return cap.block == layer; });
  if (it == caps.end()) throw CommandError("usage", "--layer " + std::to_string(layer) + " is not a dual block");

  // Head-averaged video-query x motion-key block.
  ensure_parent(a.out);
  std::ofstream csv(a.out);
  if (!csv) throw std::runtime_error("cannot open " + a.out + " for writing");
  csv << std::setprecision(8);
  const auto& p = it->probs;
  for (std::int64_t q = 0; q < it->video_tokens; ++q) {
    for (std::int64_t k = 0; k < it->motion_tokens; ++k) {
      double s = 0;
      for (std::int64_t h = 0; h < p.heads; ++h) s += static_cast<double>(p.at(h, q, it->video_tokens + k));
      csv << (k ? "," : "") << s / static_cast<double>(p.heads);
    }
    csv << '\n';
  }
  const auto report = eval::attn_diagonal_score(caps, eval::token_times(ex.grid, ex.frames));
  eval::Metrics m = eval::alignment_metrics(report);
  m["inspect.layer"] = static_cast<double>(layer);
  m["inspect.rows"] = static_cast<double>(it->video_tokens);
  m["inspect.cols"] = static_cast<double>(it->motion_tokens);
  eval::write_key_values(std::cout, m);
  return 0;
}

template <class F>
int guarded(F&& run) {
  auto fail = [](const std::string& category, const std::string& what, int code) {
    std::cerr << "error[" << category << "]: " << what << std::endl;
    return code;
  };
  try {
    return run();
  } catch (const CommandError& e) {
    return fail(e.category, e.what(), e.category == "usage" ? 2 : 1);
  } catch (const io::ConfigError& e) {
    return fail("config", e.what(), 3);
  } catch (const io::CheckpointError& e) {
    return fail("checkpoint", e.what(), 4);
  } catch (const toydata::DatasetFormatError& e) {
    return fail("data", e.what(), 5);
  } catch (const toydata::ToyDataError& e) {
    return fail("data", e.what(), 5);
  } catch (const sampling::SampleError& e) {
    return fail("sample", e.what(), 6);
  } catch (const training::TrainError& e) {
    return fail("train", e.what(), 7);
  } catch (const eval::EvalError& e) {
    return fail("eval", e.what(), 8);
  } catch (const std::exception& e) {
    return fail("io", e.what(), 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-stream video and motion diffusion on toy data"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate a synthetic video and motion corpus");
  add_config_options(g, gen.cfg);
  g->add_option("--out", gen.out, "output dataset path (default paths.dataset)");
  g->add_option("--count", gen.count, "number of clips");
  g->add_option("--kinds", gen.kinds, "comma-separated motion kinds, or all");
  g->add_option("--frames", gen.frames, "frames per clip (1 mod 4)");
  g->add_option("--size", gen.size, "frame size, N or HxW");
  g->add_option("--seed", gen.seed, "corpus seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train phase 1 (motion), phase 2 (multi-task) or both");
  add_config_options(t, tr.cfg);
  t->add_option("--phase", tr.phase, "1, 2 or all");
  t->add_flag("--resume", tr.resume, "continue from paths.checkpoint");
  t->add_flag("--skip-phase1", tr.skip_phase1, "start phase 2 from a fresh model with copied stream weights");
  t->add_option("--stop-after", tr.stop_after, "checkpoint and exit after this many steps");

  SampleArgs sa;
  auto* s = app.add_subcommand("sample", "generate video, motion or both");
  add_config_options(s, sa.cfg);
  s->add_option("--ckpt", sa.ckpt, "checkpoint (default paths.checkpoint)");
  s->add_option("--mode", sa.mode, "joint, m2v or v2m")->required();
  s->add_option("--prompt-tokens", sa.prompt, "comma-separated caption token ids");
  s->add_option("--cond", sa.cond, "dataset holding the conditioning clip");
  s->add_option("--clip", sa.clip, "record index in --cond");
  s->add_option("--seed", sa.seed, "noise seed (default: config seed)");
  s->add_option("--out", sa.out, "output prefix");
  s->add_flag("--allow-untrained", sa.allow_untrained, "permit conditional modes before multi-task training");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a checkpoint on held-out clips");
  add_config_options(e, ev.cfg);
  e->add_option("--ckpt", ev.ckpt, "checkpoint (default paths.checkpoint)");
  e->add_option("--dataset", ev.dataset, "held-out dataset (default paths.dataset)");
  e->add_option("--report", ev.report, "key=value report path; per-clip rows go to <report>.csv");
  e->add_option("--count", ev.count, "clips to evaluate");
  e->add_option("--steps", ev.steps, "sampler steps (default sample.steps)");
  e->add_flag("--oracle", ev.oracle, "score the ground truth against itself");

  InspectArgs ia;
  auto* ins = app.add_subcommand("inspect-attn", "dump video-to-motion attention of one block");
  add_config_options(ins, ia.cfg);
  ins->add_option("--ckpt", ia.ckpt, "checkpoint (default paths.checkpoint)");
  ins->add_option("--dataset", ia.dataset, "dataset holding the clip (default paths.dataset)");
  ins->add_option("--clip", ia.clip, "record index");
  ins->add_option("--layer", ia.layer, "block index (default: last block)");
  ins->add_option("--out", ia.out, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error[usage]: " << err.what() << std::endl;
    return 2;
  }
  if (*g) return guarded([&] { return cmd_gen_data(gen); });
  if (*t) return guarded([&] { return cmd_train(tr); });
  if (*s) return guarded([&] { return cmd_sample(sa); });
  if (*e) return guarded([&] { return cmd_eval(ev); });
  return guarded([&] { return cmd_inspect_attn(ia); });
}
