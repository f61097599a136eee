// Command-line front end: dataset synthesis, training, evaluation,
// cross-validation, prediction, Grad-CAM rendering and model profiling.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "petl/checkpoint.hpp"
#include "petl/dataset.hpp"
#include "petl/eval.hpp"
#include "petl/gradcam.hpp"
#include "petl/infer.hpp"
#include "petl/preprocess.hpp"
#include "petl/synth.hpp"
#include "petl/train.hpp"

namespace fs = std::filesystem;
using namespace petl;

namespace {

void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

// Every run leaves its full effective configuration next to its outputs so a
// rerun from that file reproduces it.
void log_config(CLI::App* sub, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir + "/config.txt");
  os << "# effective configuration for `" << sub->get_name() << "`\n"
     << sub->config_to_str(true, true);
}

std::vector<std::unique_ptr<Model>> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::runtime_error("no checkpoints given");
  std::vector<std::unique_ptr<Model>> models;
  for (const auto& p : paths) models.push_back(std::move(load_checkpoint(p).model));
  const int c = models.front()->spec().num_classes;
  for (auto& m : models)
    if (m->spec().num_classes != c)
      throw std::runtime_error("checkpoints disagree on class count");
  return models;
}

std::vector<Model*> raw(const std::vector<std::unique_ptr<Model>>& models) {
  std::vector<Model*> out;
  for (const auto& m : models) out.push_back(m.get());
  return out;
}

// Default class-name list for checkpoints, which store only the class count:
// the 7-class synthetic vocabulary or the full 8-class one.
std::vector<std::string> default_classes(int num_classes) {
  if (num_classes == static_cast<int>(synth_classes().size())) return synth_classes();
  return expression_vocabulary();
}

Tensor load_crop(const std::string& path, bool apply_clahe) {
  GrayImage img = read_pgm(path);
  if (apply_clahe) img = clahe(img);
  if (img.width != kInputSize || img.height != kInputSize)
    img = bilinear_resize(img, kInputSize, kInputSize);
  return normalize_input(replicate_channels(img));
}

Dataset subject_slice(const Dataset& ds, const std::vector<std::string>& subjects) {
  Dataset out;
  out.classes = ds.classes;
  for (const auto& s : ds.samples)
    for (const auto& subj : subjects)
      if (s.subject_id == subj) {
        out.samples.push_back(s);
        break;
      }
  return out;
}

std::string param_table(const std::vector<std::unique_ptr<Model>>& models,
                        const std::vector<std::string>& paths) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "checkpoint" << std::right << std::setw(12)
     << "extractor" << std::setw(10) << "loc" << std::setw(10) << "cls" << std::setw(12)
     << "total" << "\n";
  std::int64_t ensemble = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    auto b = models[i]->count_params();
    ensemble += b.total();
    os << std::left << std::setw(28) << fs::path(paths[i]).filename().string() << std::right
       << std::setw(12) << b.extractor << std::setw(10) << b.loc_head << std::setw(10)
       << b.cls_head << std::setw(12) << b.total() << "\n";
  }
  os << "ensemble total = " << ensemble << "\n";
  return os.str();
}

struct CrossvalArgs {
  std::string manifest, kind = "part-ensemble", profile = "synthetic", out = "crossval_run";
  int folds = 10, group_size = 0, ensemble_count = 1;
  bool loso = false;
  std::uint64_t seed = 0;
};

void run_crossval(const CrossvalArgs& a) {
  Dataset ds = load_manifest(a.manifest);
  const auto subjects = ds.subjects();
  FoldPlan plan;
  if (a.loso) {
    plan = make_loso(subjects);
  } else {
    int gs = a.group_size;
    if (gs <= 0) gs = std::max<int>(1, static_cast<int>(subjects.size()) / a.folds);
    plan = make_kfold_by_subject(subjects, a.folds, gs);
  }

  std::vector<ConfusionMatrix> fold_matrices;
  std::ostringstream report;
  for (std::size_t f = 0; f < plan.size(); ++f) {
    const std::string fold_dir = a.out + "/fold" + std::to_string(f);
    Dataset train_ds = subject_slice(ds, plan[f].train_subjects);
    Dataset test_ds = subject_slice(ds, plan[f].test_subjects);

    TrainConfig cfg = dataset_profile(a.profile);
    cfg.seed = a.seed + 1000ull * f;
    PipelineResult pr = train_full_pipeline(train_ds, a.kind, cfg, fold_dir, a.ensemble_count);

    auto models = load_models(pr.checkpoint_paths);
    const auto test_samples = load_dataset_images(test_ds);
    const auto labels = predict_labels(raw(models), test_samples);
    std::vector<std::string> predicted, actual;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      predicted.push_back(ds.classes[static_cast<std::size_t>(labels[i])]);
      actual.push_back(test_ds.samples[i].expression);
    }
    ConfusionMatrix cm = evaluate(predicted, actual, ds.classes);
    write_text(fold_dir + "/confusion.txt", cm.to_text());
    write_text(fold_dir + "/confusion.csv", cm.to_csv());
    report << "fold " << f << " accuracy = " << std::fixed << std::setprecision(4)
           << cm.accuracy() << "\n";
    fold_matrices.push_back(std::move(cm));
  }

  ConfusionMatrix pooled = aggregate_folds(fold_matrices);
  double mean_acc = 0;
  for (const auto& m : fold_matrices) mean_acc += m.accuracy();
  mean_acc /= static_cast<double>(fold_matrices.size());
  report << "fold-mean accuracy = " << std::fixed << std::setprecision(4) << mean_acc << "\n";
  report << "pooled-count accuracy = " << pooled.accuracy() << "\n\n" << pooled.to_text();
  write_text(a.out + "/report.txt", report.str());
  write_text(a.out + "/confusion.csv", pooled.to_csv());
  std::cout << report.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"part-based ensemble facial-expression toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic face dataset");
  int sy_subjects = 12, sy_per = 21;
  std::uint64_t sy_seed = 7;
  std::string sy_out = "data";
  synth->add_option("--subjects", sy_subjects, "number of subjects");
  synth->add_option("--per-subject", sy_per, "images per subject");
  synth->add_option("--seed", sy_seed, "master random seed");
  synth->add_option("--out", sy_out, "output directory")->required();
  synth->set_config("--config");

  // train
  auto* train = app.add_subcommand("train", "train networks from a manifest");
  std::string tr_manifest, tr_kind = "part-ensemble", tr_profile = "synthetic",
              tr_out = "train_run";
  std::uint64_t tr_seed = 0;
  int tr_p1 = -1, tr_p2 = -1, tr_base = -1, tr_ensemble = 1;
  bool tr_no_augment = false, tr_metrics = false;
  train->add_option("--manifest", tr_manifest, "dataset manifest")->required();
  train->add_option("--kind", tr_kind, "part-ensemble | full | baseline");
  train->add_option("--dataset-profile", tr_profile, "ckplus | jaffe | sfew | synthetic");
  train->add_option("--out", tr_out, "run directory");
  train->add_option("--seed", tr_seed, "master random seed");
  train->add_option("--epochs-phase1", tr_p1, "override phase-1 epochs");
  train->add_option("--epochs-phase2", tr_p2, "override phase-2 epochs");
  train->add_option("--epochs-baseline", tr_base, "override baseline epochs");
  train->add_option("--ensemble-count", tr_ensemble, "models for full/baseline ensembles");
  train->add_flag("--no-augment", tr_no_augment, "disable augmentation");
  train->add_flag("--metrics", tr_metrics, "write per-epoch metrics CSVs");
  train->set_config("--config");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on a manifest");
  std::string ev_manifest, ev_out = "eval_run";
  std::vector<std::string> ev_ckpts;
  eval_cmd->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoints", ev_ckpts, "checkpoint files")->required();
  eval_cmd->add_option("--out", ev_out, "run directory");
  eval_cmd->set_config("--config");

  // crossval
  auto* cv = app.add_subcommand("crossval", "subject-independent cross-validation");
  CrossvalArgs cva;
  cv->add_option("--manifest", cva.manifest, "dataset manifest")->required();
  cv->add_option("--kind", cva.kind, "part-ensemble | full | baseline");
  cv->add_option("--dataset-profile", cva.profile, "epoch profile");
  cv->add_option("--folds", cva.folds, "number of folds");
  cv->add_option("--group-size", cva.group_size, "test subjects per fold (0 = n/k)");
  cv->add_option("--ensemble-count", cva.ensemble_count, "models for full/baseline");
  cv->add_flag("--loso", cva.loso, "leave-one-subject-out");
  cv->add_option("--seed", cva.seed, "master random seed");
  cv->add_option("--out", cva.out, "run directory");
  cv->set_config("--config");

  // cross-dataset
  auto* xd = app.add_subcommand("cross-dataset", "evaluate on a foreign dataset");
  std::string xd_manifest, xd_source_manifest, xd_out = "cross_dataset_run";
  std::vector<std::string> xd_ckpts;
  xd->add_option("--manifest", xd_manifest, "target dataset manifest")->required();
  xd->add_option("--checkpoints", xd_ckpts, "source-trained checkpoints")->required();
  xd->add_option("--source-manifest", xd_source_manifest,
                 "manifest defining the source class vocabulary")
      ->required();
  xd->add_option("--out", xd_out, "run directory");
  xd->set_config("--config");

  // predict
  auto* pr = app.add_subcommand("predict", "classify one face crop");
  std::string pr_image;
  std::vector<std::string> pr_ckpts, pr_classes;
  bool pr_clahe = false;
  pr->add_option("--image", pr_image, "PGM face crop")->required();
  pr->add_option("--checkpoints", pr_ckpts, "checkpoint files")->required();
  pr->add_option("--classes", pr_classes, "class names in training order");
  pr->add_flag("--clahe", pr_clahe, "apply CLAHE before prediction");
  pr->set_config("--config");

  // gradcam
  auto* gc = app.add_subcommand("gradcam", "render Grad-CAM heatmaps and overlays");
  std::string gc_image, gc_class, gc_out = "gradcam_run";
  std::vector<std::string> gc_ckpts, gc_classes;
  bool gc_clahe = false;
  gc->add_option("--image", gc_image, "PGM face crop")->required();
  gc->add_option("--checkpoints", gc_ckpts, "checkpoint files")->required();
  gc->add_option("--class", gc_class, "target class name (default: predicted)");
  gc->add_option("--classes", gc_classes, "class names in training order");
  gc->add_option("--out", gc_out, "output directory");
  gc->add_flag("--clahe", gc_clahe, "apply CLAHE before the forward pass");
  gc->set_config("--config");

  // profile
  auto* prof = app.add_subcommand("profile", "parameter counts and inference latency");
  std::vector<std::string> pf_ckpts;
  int pf_trials = 50;
  prof->add_option("--checkpoints", pf_ckpts, "checkpoint files")->required();
  prof->add_option("--trials", pf_trials, "timed trials after warmup");
  prof->set_config("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) {
      log_config(synth, sy_out);
      Dataset ds = generate_synthetic(sy_subjects, sy_per, sy_seed, sy_out);
      std::cout << "wrote " << ds.samples.size() << " samples for "
                << ds.subjects().size() << " subjects to " << sy_out << "\n";
    } else if (train->parsed()) {
      log_config(train, tr_out);
      Dataset ds = load_manifest(tr_manifest);
      TrainConfig cfg = dataset_profile(tr_profile);
      cfg.seed = tr_seed;
      if (tr_p1 >= 0) cfg.epochs_phase1 = tr_p1;
      if (tr_p2 >= 0) cfg.epochs_phase2 = tr_p2;
      if (tr_base >= 0) cfg.epochs_baseline = tr_base;
      if (tr_no_augment) cfg.augment = false;
      if (tr_metrics) cfg.metrics_path = tr_out + "/metrics.csv";
      PipelineResult res = train_full_pipeline(ds, tr_kind, cfg, tr_out, tr_ensemble);
      for (const auto& p : res.checkpoint_paths) std::cout << "checkpoint " << p << "\n";
    } else if (eval_cmd->parsed()) {
      log_config(eval_cmd, ev_out);
      Dataset ds = load_manifest(ev_manifest);
      auto models = load_models(ev_ckpts);
      const auto samples = load_dataset_images(ds);
      const auto labels = predict_labels(raw(models), samples);
      std::vector<std::string> predicted, actual;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        predicted.push_back(ds.classes[static_cast<std::size_t>(labels[i])]);
        actual.push_back(ds.samples[i].expression);
      }
      ConfusionMatrix cm = evaluate(predicted, actual, ds.classes);
      write_text(ev_out + "/confusion.txt", cm.to_text());
      write_text(ev_out + "/confusion.csv", cm.to_csv());
      std::cout << cm.to_text();
    } else if (cv->parsed()) {
      log_config(cv, cva.out);
      run_crossval(cva);
    } else if (xd->parsed()) {
      log_config(xd, xd_out);
      Dataset target = load_manifest(xd_manifest);
      Dataset source = load_manifest(xd_source_manifest, false);
      auto models = load_models(xd_ckpts);
      if (models.front()->spec().num_classes != static_cast<int>(source.classes.size()))
        throw std::runtime_error("source manifest class count does not match checkpoints");
      const auto samples = load_dataset_images(target);
      const auto labels = predict_labels(raw(models), samples);
      std::vector<std::string> predicted, actual;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        predicted.push_back(source.classes[static_cast<std::size_t>(labels[i])]);
        actual.push_back(target.samples[i].expression);
      }
      CrossDatasetReport rep =
          cross_dataset_eval(predicted, actual, source.classes, target.classes);
      std::ostringstream os;
      os << "dropped " << rep.dropped << " target samples without a source class\n"
         << rep.matrix.to_text();
      write_text(xd_out + "/report.txt", os.str());
      write_text(xd_out + "/confusion.csv", rep.matrix.to_csv());
      std::cout << os.str();
    } else if (pr->parsed()) {
      auto models = load_models(pr_ckpts);
      const Tensor crop = load_crop(pr_image, pr_clahe);
      EnsemblePrediction pred = predict_ensemble(raw(models), crop);
      std::vector<std::string> classes =
          pr_classes.empty() ? default_classes(models.front()->spec().num_classes)
                             : pr_classes;
      if (classes.size() != pred.scores.size())
        throw std::runtime_error("--classes count does not match model class count");
      std::cout << prediction_record(pred, classes);
    } else if (gc->parsed()) {
      log_config(gc, gc_out);
      auto models = load_models(gc_ckpts);
      const Tensor crop = load_crop(gc_image, gc_clahe);
      GrayImage base = read_pgm(gc_image);
      if (gc_clahe) base = clahe(base);
      if (base.width != kInputSize || base.height != kInputSize)
        base = bilinear_resize(base, kInputSize, kInputSize);

      int class_index = -1;
      if (!gc_class.empty()) {
        std::vector<std::string> classes =
            gc_classes.empty() ? default_classes(models.front()->spec().num_classes)
                               : gc_classes;
        const auto it = std::find(classes.begin(), classes.end(), gc_class);
        if (it == classes.end())
          throw std::runtime_error("class '" + gc_class + "' not in the class list");
        class_index = static_cast<int>(it - classes.begin());
      }

      std::vector<Tensor> maps;
      for (std::size_t i = 0; i < models.size(); ++i) {
        GradCamResult res = gradcam(*models[i], crop, class_index);
        std::string tag = header_value(load_checkpoint(gc_ckpts[i]).header, "feature");
        if (tag.empty()) tag = "net" + std::to_string(i);
        const Tensor norm = normalize_map(res.map);
        GrayImage hm(norm.dim(1), norm.dim(0));
        for (std::int64_t j = 0; j < norm.size(); ++j)
          hm.pixels[static_cast<std::size_t>(j)] =
              static_cast<std::uint8_t>(std::clamp(norm[j] * 255.0f + 0.5f, 0.0f, 255.0f));
        write_pgm(hm, gc_out + "/heatmap_" + tag + ".pgm");
        write_ppm(overlay_heatmap(base, res.map), gc_out + "/overlay_" + tag + ".ppm");
        maps.push_back(res.map);
      }
      const Tensor u = union_maps(maps);
      write_ppm(overlay_heatmap(base, u), gc_out + "/overlay_union.ppm");
      std::cout << "wrote " << maps.size() << " overlays + union to " << gc_out << "\n";
    } else if (prof->parsed()) {
      auto models = load_models(pf_ckpts);
      std::cout << param_table(models, pf_ckpts);
      ProfileReport rep = profile_inference(raw(models), pf_trials, pf_ckpts);
      std::cout << std::fixed << std::setprecision(3);
      for (std::size_t i = 0; i < models.size(); ++i)
        std::cout << fs::path(pf_ckpts[i]).filename().string() << ": mean "
                  << rep.per_model_mean_ms[i] << " ms, median " << rep.per_model_median_ms[i]
                  << " ms, " << rep.file_sizes[i] << " bytes\n";
      std::cout << "serial ensemble: mean " << rep.serial_ensemble_mean_ms << " ms, median "
                << rep.serial_ensemble_median_ms << " ms\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
