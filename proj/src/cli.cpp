#include "tipscan/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/logger.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/ostream_sink.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "tipscan/augment.hpp"
#include "tipscan/config.hpp"
#include "tipscan/error.hpp"
#include "tipscan/gradcheck.hpp"
#include "tipscan/image_io.hpp"
#include "tipscan/manifest.hpp"
#include "tipscan/mapgen.hpp"
#include "tipscan/model_io.hpp"
#include "tipscan/protocols.hpp"
#include "tipscan/report.hpp"
#include "tipscan/synthetic.hpp"
#include "tipscan/tiles.hpp"
#include "tipscan/training.hpp"
#include "tipscan/version.hpp"

namespace tipscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kManifestName = "manifest.csv";

struct Context {
    RunConfig config;
    ReportFormat format = ReportFormat::md;
    bool leaky_splits = false;
    bool allow_overlap = false;
    std::shared_ptr<spdlog::logger> log;
    std::ostream* out = nullptr;

    std::uint64_t seed() const { return config.get_u64("run.seed"); }
    int jobs() const {
        const auto j = config.get_int("run.jobs");
        if (j < 1) throw UsageError("--jobs must be at least 1");
        return static_cast<int>(j);
    }
    EvalOptions eval_options() const {
        EvalOptions o;
        o.split.group_by_provenance = !leaky_splits;
        o.jobs = jobs();
        o.allow_overlap = allow_overlap;
        return o;
    }
};

// A leaf subcommand: its handler and where its output goes.
struct Leaf {
    std::function<int(Context&)> run;
    const std::string* out = nullptr;
    bool out_is_dir = false;
};

// String flag that overrides a config key when given.
struct Override {
    CLI::Option* option;
    std::string key;
    std::shared_ptr<std::string> value;
};

class Builder {
public:

    void bind(CLI::App* app, const std::string& flag, const std::string& key,
              const std::string& help) {
        auto value = std::make_shared<std::string>();
        auto* opt = app->add_option(flag, *value, help + " [" + key + "]");
        overrides_.push_back({opt, key, value});
    }

    void apply(RunConfig& config) const {
        for (const auto& o : overrides_) {
            if (o.option->count() > 0) config.set(o.key, *o.value);
        }
    }

    std::map<const CLI::App*, Leaf> leaves;

private:
    std::vector<Override> overrides_;
};

DatasetManifest read_manifest(const std::string& path) {
    return load_manifest(path);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Prints text to stdout, and to the --out file when one was given.
void emit(Context& ctx, const std::string& text, const std::string& out_path) {
    *ctx.out << text;
    if (!out_path.empty()) write_text(out_path, text);
}

std::string render_summary(const Context& ctx, std::string_view kind, const json& body) {
    if (ctx.format == ReportFormat::json) return envelope(kind, body).dump(2) + "\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, v] : body.items()) {
        rows.push_back({k, v.is_string() ? v.get<std::string>() : v.dump()});
    }
    if (ctx.format == ReportFormat::md) return markdown_table({"field", "value"}, rows);
    std::string csv = "field,value\n";
    for (const auto& r : rows) csv += r[0] + "," + r[1] + "\n";
    return csv;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

NetworkSpec arch_from_config(const Context& ctx) {
    return build_architecture(ctx.config.get("train.arch"),
                              static_cast<int>(ctx.config.get_int("train.input_side")));
}

MetricsReport read_report_file(const std::string& path, std::size_t* samples) {
    const auto bytes = read_file_bytes(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error("cannot parse report " + path + ": " + e.what());
    }
    if (j.contains("report")) j = j.at("report");
    if (samples != nullptr && j.contains("samples")) *samples = j.at("samples").get<std::size_t>();
    return metrics_from_json(j);
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, const std::optional<fs::path>& dir) {
    std::vector<spdlog::sink_ptr> sinks;
    // The full resolved config goes to run.log only (debug level).
    sinks.push_back(std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true));
    sinks.back()->set_level(spdlog::level::info);
    if (dir) {
        fs::create_directories(*dir);
        sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>(
            (*dir / "run.log").string(), true));
        sinks.back()->set_level(spdlog::level::debug);
    }
    auto log = std::make_shared<spdlog::logger>("tipscan", sinks.begin(), sinks.end());
    log->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
    log->set_level(spdlog::level::debug);
    log->flush_on(spdlog::level::debug);
    return log;
}

void add_commands(CLI::App& app, Builder& b) {
    // dataset
    auto* dataset = app.add_subcommand("dataset", "Create or check patch manifests");
    {
        auto* synth = dataset->add_subcommand("synth", "Generate a balanced synthetic dataset");
        auto per_class = std::make_shared<int>(50);
        auto out = std::make_shared<std::string>();
        synth->add_option("--per-class", *per_class, "patches per class")->required();
        synth->add_option("--out", *out, "output directory")->required();
        b.bind(synth, "--bbox", "synthetic.bbox", "coordinate box");
        b.bind(synth, "--clutter-min", "synthetic.clutter_min", "fewest clutter shapes");
        b.bind(synth, "--clutter-max", "synthetic.clutter_max", "most clutter shapes");
        b.leaves[synth] = {[per_class, out](Context& ctx) {
                               if (*per_class < 1) throw UsageError("--per-class must be at least 1");
                               const auto m = generate_synthetic(*per_class, ctx.seed(),
                                                                 synthetic_params(ctx.config), *out);
                               const auto path = fs::path(*out) / kManifestName;
                               save_manifest(m, path);
                               ctx.log->info("wrote {} records to {}", m.size(), path.string());
                               *ctx.out << render_summary(ctx, "dataset",
                                                          {{"manifest", path.string()},
                                                           {"records", m.size()}});
                               return 0;
                           },
                           out.get(), true};

        auto* validate = dataset->add_subcommand("validate", "Check a manifest and its files");
        auto manifest = std::make_shared<std::string>();
        validate->add_option("--manifest", *manifest, "manifest CSV")->required();
        b.leaves[validate] = {[manifest](Context& ctx) {
                                  const auto m = read_manifest(*manifest);
                                  validate_records(m.records);
                                  const auto balance = validate_balance(m);
                                  ctx.log->info("manifest {} is valid", *manifest);
                                  *ctx.out << render_summary(
                                      ctx, "dataset",
                                      {{"manifest", *manifest},
                                       {"records", m.size()},
                                       {"garbage", balance.count_positive},
                                       {"not_garbage", balance.count_negative},
                                       {"balanced", balance.balanced},
                                       {"patch_width", m.patch_width},
                                       {"patch_height", m.patch_height}});
                                  return 0;
                              }};
    }

    // augment
    {
        auto* augment = app.add_subcommand("augment", "Expand a dataset with augmentation");
        auto manifest = std::make_shared<std::string>();
        auto technique = std::make_shared<std::string>();
        auto pipeline = std::make_shared<int>(0);
        auto out = std::make_shared<std::string>();
        augment->add_option("--manifest", *manifest, "input manifest CSV")->required();
        auto* t = augment->add_option("--technique", *technique, "rotate|flip|sharpen|crop");
        auto* p = augment->add_option("--pipeline", *pipeline, "1|2|3");
        t->excludes(p);
        augment->add_option("--out", *out, "output directory")->required();
        b.bind(augment, "--crop-fraction", "augment.crop_fraction", "centre crop fraction");
        b.leaves[augment] = {
            [=](Context& ctx) {
                if (t->count() == 0 && p->count() == 0) {
                    throw UsageError("augment needs --technique or --pipeline");
                }
                const auto input = read_manifest(*manifest);
                const auto options = augment_options(ctx.config);
                DatasetManifest result;
                if (t->count() > 0) {
                    const auto parsed = parse_technique(*technique);
                    if (!parsed) {
                        std::string msg = "unknown technique '" + *technique + "'";
                        const auto hint = suggest(*technique, {"rotate", "flip", "sharpen", "crop"});
                        if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
                        throw UsageError(msg);
                    }
                    result = augment_single(input, *parsed, *out, options);
                } else {
                    if (*pipeline < 1 || *pipeline > 3) throw UsageError("--pipeline must be 1, 2 or 3");
                    result = build_pipeline(input, static_cast<PipelineId>(*pipeline), *out, options);
                }
                const auto path = fs::path(*out) / kManifestName;
                save_manifest(result, path);
                ctx.log->info("wrote {} records to {}", result.size(), path.string());
                *ctx.out << render_summary(ctx, "dataset",
                                           {{"manifest", path.string()}, {"records", result.size()}});
                return 0;
            },
            out.get(), true};
    }

    auto bind_training = [&b](CLI::App* sub) {
        b.bind(sub, "--arch", "train.arch", "mini_plain|mini_resnet|mini_resnet_deep");
        b.bind(sub, "--batch", "train.batch", "mini-batch size");
        b.bind(sub, "--epochs", "train.epochs", "epochs");
        b.bind(sub, "--lr", "train.lr", "learning rate");
        b.bind(sub, "--momentum", "train.momentum", "momentum");
        b.bind(sub, "--input-side", "train.input_side", "network input side");
    };

    // train
    {
        auto* train_cmd = app.add_subcommand("train", "Train a classifier");
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        train_cmd->add_option("--manifest", *manifest, "training manifest CSV")->required();
        train_cmd->add_option("--out", *out, "model file")->required();
        bind_training(train_cmd);
        b.leaves[train_cmd] = {
            [=](Context& ctx) {
                const auto data = read_manifest(*manifest);
                const auto spec = arch_from_config(ctx);
                const auto config = train_config(ctx.config);
                const auto result = train(spec, data, config, [&](const EpochStats& s) {
                    ctx.log->info("epoch {} loss {:.6f} accuracy {:.4f}", s.epoch, s.mean_loss,
                                  s.accuracy);
                });
                save_model(*out, spec, result.model);
                ctx.log->info("saved model to {}", *out);
                const auto& last = result.history.back();
                *ctx.out << render_summary(ctx, "train",
                                           {{"model", *out},
                                            {"arch", spec.name},
                                            {"records", data.size()},
                                            {"final_loss", last.mean_loss},
                                            {"final_accuracy", last.accuracy}});
                return 0;
            },
            out.get(), false};
    }

    // gradcheck
    {
        auto* gc = app.add_subcommand("gradcheck", "Compare backprop with finite differences");
        auto arch = std::make_shared<std::string>("mini_plain");
        auto side = std::make_shared<int>(16);
        auto coords = std::make_shared<int>(200);
        auto epsilon = std::make_shared<double>(1e-5);
        auto tolerance = std::make_shared<double>(1e-4);
        gc->add_option("--arch", *arch, "architecture");
        gc->add_option("--input-side", *side, "input side");
        gc->add_option("--coordinates", *coords, "sampled parameter coordinates");
        gc->add_option("--epsilon", *epsilon, "finite-difference step");
        gc->add_option("--tolerance", *tolerance, "largest accepted relative error");
        b.leaves[gc] = {[=](Context& ctx) {
            GradCheckOptions o;
            o.coordinates = *coords;
            o.epsilon = *epsilon;
            const auto r = grad_check(build_architecture(*arch, *side), ctx.seed(), o);
            const bool ok = r.max_relative_error < *tolerance;
            *ctx.out << render_summary(ctx, "gradcheck",
                                       {{"arch", *arch},
                                        {"max_relative_error", r.max_relative_error},
                                        {"coordinates_checked", r.coordinates_checked},
                                        {"kinks_skipped", r.kinks_skipped},
                                        {"tolerance", *tolerance},
                                        {"passed", ok}});
            if (!ok) ctx.log->error("gradient check failed on {}", *arch);
            return ok ? 0 : 1;
        }};
    }

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate with a validation protocol");
    {
        auto* cv = eval->add_subcommand("crossval", "Stratified k-fold cross-validation");
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cv->add_option("--manifest", *manifest, "dataset manifest CSV")->required();
        cv->add_option("--out", *out, "report file");
        b.bind(cv, "--k", "eval.k", "folds");
        bind_training(cv);
        b.leaves[cv] = {[=](Context& ctx) {
                            const auto data = read_manifest(*manifest);
                            const auto r = cross_validate(
                                arch_from_config(ctx), data,
                                static_cast<int>(ctx.config.get_int("eval.k")),
                                train_config(ctx.config), ctx.eval_options());
                            emit(ctx, render(r, ctx.format, "crossval", data.size()), *out);
                            return 0;
                        },
                        out.get(), false};

        auto* sp = eval->add_subcommand("split", "Stratified train/holdout split");
        auto sp_manifest = std::make_shared<std::string>();
        auto sp_out = std::make_shared<std::string>();
        sp->add_option("--manifest", *sp_manifest, "dataset manifest CSV")->required();
        sp->add_option("--out", *sp_out, "report file");
        b.bind(sp, "--fraction", "eval.train_fraction", "train share");
        bind_training(sp);
        b.leaves[sp] = {[=](Context& ctx) {
                            const auto data = read_manifest(*sp_manifest);
                            const auto r = split_eval(arch_from_config(ctx), data,
                                                      ctx.config.get_double("eval.train_fraction"),
                                                      train_config(ctx.config), ctx.eval_options());
                            emit(ctx, render(r, ctx.format, "split", data.size()), *sp_out);
                            return 0;
                        },
                        sp_out.get(), false};

        auto* te = eval->add_subcommand("test", "Evaluate a trained model on a test set");
        auto model = std::make_shared<std::string>();
        auto te_manifest = std::make_shared<std::string>();
        auto train_manifest = std::make_shared<std::string>();
        auto te_out = std::make_shared<std::string>();
        te->add_option("--model", *model, "model file")->required();
        te->add_option("--manifest", *te_manifest, "test manifest CSV")->required();
        te->add_option("--train-manifest", *train_manifest, "training manifest for the leakage check");
        te->add_option("--out", *te_out, "report file");
        b.leaves[te] = {[=](Context& ctx) {
                            const auto stored = load_model(*model);
                            const auto test = read_manifest(*te_manifest);
                            std::optional<DatasetManifest> training;
                            if (!train_manifest->empty()) training = read_manifest(*train_manifest);
                            const auto r = test_eval(stored.spec, stored.params, test,
                                                     training ? &*training : nullptr,
                                                     ctx.eval_options());
                            emit(ctx, render(r, ctx.format, "test", test.size()), *te_out);
                            return 0;
                        },
                        te_out.get(), false};
    }

    // compare
    {
        auto* cmp = app.add_subcommand("compare", "Cross-validate several architectures on the same folds");
        auto archs = std::make_shared<std::string>("mini_plain,mini_resnet");
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmp->add_option("--archs", *archs, "comma-separated architectures");
        cmp->add_option("--manifest", *manifest, "dataset manifest CSV")->required();
        cmp->add_option("--out", *out, "report file");
        b.bind(cmp, "--k", "eval.k", "folds");
        b.bind(cmp, "--batch", "train.batch", "mini-batch size");
        b.bind(cmp, "--epochs", "train.epochs", "epochs");
        b.bind(cmp, "--lr", "train.lr", "learning rate");
        b.bind(cmp, "--momentum", "train.momentum", "momentum");
        b.bind(cmp, "--input-side", "train.input_side", "network input side");
        b.leaves[cmp] = {[=](Context& ctx) {
                             const auto names = split_list(*archs);
                             if (names.empty()) throw UsageError("--archs lists no architectures");
                             const int side = static_cast<int>(ctx.config.get_int("train.input_side"));
                             std::vector<NetworkSpec> specs;
                             for (const auto& n : names) specs.push_back(build_architecture(n, side));
                             const auto data = read_manifest(*manifest);
                             const auto rows = compare_models(
                                 specs, data, static_cast<int>(ctx.config.get_int("eval.k")),
                                 train_config(ctx.config), ctx.eval_options());
                             emit(ctx, render(rows, ctx.format), *out);
                             return 0;
                         },
                         out.get(), false};
    }

    // report
    auto* report = app.add_subcommand("report", "Combine evaluation reports");
    {
        auto* merge = report->add_subcommand("merge", "Average crossval, split and test reports");
        auto cv = std::make_shared<std::string>();
        auto sp = std::make_shared<std::string>();
        auto te = std::make_shared<std::string>();
        auto label = std::make_shared<std::string>("dataset");
        auto out = std::make_shared<std::string>();
        auto printed_acc = std::make_shared<double>(0.0);
        auto printed_mcc = std::make_shared<double>(0.0);
        merge->add_option("--crossval", *cv, "cross-validation report JSON")->required();
        merge->add_option("--split", *sp, "split report JSON")->required();
        merge->add_option("--test", *te, "test report JSON")->required();
        merge->add_option("--label", *label, "dataset label");
        merge->add_option("--out", *out, "report file");
        auto* pa = merge->add_option("--printed-accuracy", *printed_acc,
                                     "published averaged accuracy in percent, checked for consistency");
        auto* pm = merge->add_option("--printed-mcc", *printed_mcc,
                                     "published averaged MCC, checked for consistency");
        b.leaves[merge] = {[=](Context& ctx) {
                               std::size_t samples = 0;
                               const auto a = read_report_file(*cv, &samples);
                               const auto s = read_report_file(*sp, nullptr);
                               const auto t = read_report_file(*te, nullptr);
                               PrintedAverages printed;
                               if (pa->count() > 0) printed.accuracy_percent = *printed_acc;
                               if (pm->count() > 0) printed.mcc = *printed_mcc;
                               const auto r = averaged_report(a, s, t, printed);
                               for (const auto& d : r.discrepancies) {
                                   ctx.log->warn("printed averaged {} {} differs from computed {}",
                                                 d.field, d.printed, d.computed);
                               }
                               emit(ctx, render(r, ctx.format, *label, samples), *out);
                               return 0;
                           },
                           out.get(), false};
    }

    // map
    auto* map = app.add_subcommand("map", "Garbage map generation");
    {
        auto* est = map->add_subcommand("estimate", "Count patches needed to cover an area");
        auto area = std::make_shared<double>(0.0);
        auto bbox = std::make_shared<std::string>();
        auto* area_opt = est->add_option("--area-km2", *area, "area in square kilometres");
        auto* bbox_opt = est->add_option("--bbox", *bbox, "minlat,minlon,maxlat,maxlon");
        area_opt->excludes(bbox_opt);
        b.bind(est, "--patch-m", "map.patch_m", "patch side in metres");
        b.leaves[est] = {[=](Context& ctx) {
            double km2 = *area;
            if (bbox_opt->count() > 0) {
                const auto box = parse_bbox(*bbox);
                box.validate();
                km2 = bbox_area_km2(box);
            } else if (area_opt->count() == 0) {
                throw UsageError("map estimate needs --area-km2 or --bbox");
            }
            const double side = ctx.config.get_double("map.patch_m");
            const auto n = estimate_workload(km2, side);
            *ctx.out << render_summary(ctx, "estimate",
                                       {{"area_km2", km2}, {"patch_m", side}, {"patches", n}});
            return 0;
        }};

        auto* sc = map->add_subcommand("scan", "Classify a grid over a bounding box");
        auto model = std::make_shared<std::string>();
        auto sc_bbox = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto journal = std::make_shared<std::string>();
        auto stop_after = std::make_shared<std::size_t>(0);
        sc->add_option("--model", *model, "model file")->required();
        sc->add_option("--bbox", *sc_bbox, "minlat,minlon,maxlat,maxlon")->required();
        sc->add_option("--out", *out, "GeoJSON output")->required();
        sc->add_option("--journal", *journal, "progress journal (default <out>.journal)");
        auto* stop_opt = sc->add_option("--stop-after", *stop_after,
                                        "classify at most this many new cells, then stop");
        b.bind(sc, "--patch-m", "map.patch_m", "cell side in metres");
        b.bind(sc, "--mpp", "map.mpp", "metres per pixel");
        b.bind(sc, "--tiles-dir", "imagery.local_dir", "local tile directory");
        b.bind(sc, "--url-template", "imagery.url_template", "tile server URL template");
        b.bind(sc, "--cache-dir", "imagery.cache_dir", "tile cache directory");
        b.bind(sc, "--max-concurrent", "imagery.max_concurrent", "in-flight tile request cap");
        b.leaves[sc] = {
            [=](Context& ctx) {
                const auto stored = load_model(*model);
                const auto source_config = tile_source_config(ctx.config);
                auto source = make_tile_source(source_config);
                ScanOptions o;
                o.bbox = parse_bbox(*sc_bbox);
                o.patch_side_m = ctx.config.get_double("map.patch_m");
                o.m_per_px = ctx.config.get_double("map.mpp");
                o.workers = ctx.jobs();
                o.tile_size = source_config.tile_size;
                o.max_concurrent = source_config.max_concurrent;
                o.journal = journal->empty() ? fs::path(*out + ".journal") : fs::path(*journal);
                o.source_id = source_config.source_hash();
                if (stop_opt->count() > 0) o.stop_after = *stop_after;
                ctx.log->info("scanning {} cells", grid_region(o.bbox, o.patch_side_m).size());
                const auto result = scan(stored.spec, stored.params, *source, o);
                if (result.cells_resumed > 0) {
                    ctx.log->info("resumed {} cells from {}", result.cells_resumed, o.journal.string());
                }
                if (!result.complete) {
                    ctx.log->warn("scan stopped early; rerun to resume from {}", o.journal.string());
                    *ctx.out << render_summary(ctx, "scan",
                                               {{"complete", false},
                                                {"cells_total", result.cells_total},
                                                {"journal", o.journal.string()}});
                    return 0;
                }
                write_text(*out, result.document.dump(2) + "\n");
                fs::remove(o.journal);
                json summary = result.document.at("summary");
                summary["complete"] = true;
                summary["map"] = *out;
                *ctx.out << render_summary(ctx, "scan", summary);
                return 0;
            },
            out.get(), false};
    }
}

void report_failure(const Context& ctx, std::ostream& err, const char* what) {
    if (ctx.log) {
        ctx.log->error("{}", what);
    } else {
        err << "error: " << what << "\n";
    }
}

const CLI::App* deepest(const CLI::App* app) {
    while (true) {
        const auto subs = app->get_subcommands();
        if (subs.empty()) return app;
        app = subs.front();
    }
}

std::vector<std::string> candidates_for(const CLI::App* app, bool options) {
    std::vector<std::string> names;
    for (const CLI::App* a = app; a != nullptr; a = a->get_parent()) {
        if (options) {
            for (const auto* o : a->get_options()) {
                for (const auto& n : o->get_lnames()) names.push_back("--" + n);
            }
        } else if (a == app) {
            for (const auto* s : a->get_subcommands([](const CLI::App*) { return true; })) {
                names.push_back(s->get_name());
            }
        }
    }
    return names;
}

std::string subcommand_list(const CLI::App* app) {
    std::string list;
    for (const auto* s : app->get_subcommands([](const CLI::App*) { return true; })) {
        if (!list.empty()) list += ", ";
        list += s->get_name();
    }
    return list;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app("Fly-tipping detection from aerial imagery", "tipscan");
    app.set_version_flag("--version", std::string(kToolVersion));
    app.allow_extras();
    Builder b;
    std::string config_flag;
    std::string format_text = "md";
    bool leaky = false;
    bool allow_overlap = false;
    auto* config_opt = app.add_option("--config", config_flag,
                                      "config file (falls back to $TIPSCAN_CONFIG)");
    b.bind(&app, "--seed", "run.seed", "global seed");
    b.bind(&app, "--jobs", "run.jobs", "CPU worker cap");
    app.add_option("--format", format_text, "json|md|csv");
    app.add_flag("--leaky-splits", leaky, "split by record instead of provenance group");
    app.add_flag("--allow-overlap", allow_overlap, "permit train/test provenance overlap");
    add_commands(app, b);
    std::function<void(CLI::App*)> configure = [&](CLI::App* a) {
        for (auto* s : a->get_subcommands([](const CLI::App*) { return true; })) {
            s->fallthrough();
            s->allow_extras();
            configure(s);
        }
    };
    configure(&app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    const CLI::App* leaf_app = deepest(&app);
    const auto extras = app.remaining(true);
    if (!extras.empty()) {
        const auto& bad = extras.front();
        const bool is_option = bad.rfind("-", 0) == 0;
        std::string token = bad.substr(0, bad.find('='));
        err << "error: unrecognised " << (is_option ? "option" : "argument") << " '" << token << "'";
        const auto hint = suggest(token, candidates_for(leaf_app, is_option));
        if (!hint.empty()) err << "; did you mean '" << hint << "'?";
        err << "\n";
        return 2;
    }
    const auto leaf = b.leaves.find(leaf_app);
    if (leaf == b.leaves.end()) {
        err << (leaf_app == &app ? app.help() : leaf_app->help());
        err << "error: choose a subcommand: " << subcommand_list(leaf_app) << "\n";
        return 2;
    }

    Context ctx;
    ctx.out = &out;
    try {
        const auto fmt = parse_format(format_text);
        if (!fmt) throw UsageError("--format must be json, md or csv, got '" + format_text + "'");
        ctx.format = *fmt;
        ctx.leaky_splits = leaky;
        ctx.allow_overlap = allow_overlap;
        const auto config_path = resolve_config_path(
            config_opt->count() > 0 ? std::optional<std::string>(config_flag) : std::nullopt,
            std::getenv("TIPSCAN_CONFIG"));
        if (config_path) ctx.config = RunConfig::load(*config_path);
        b.apply(ctx.config);

        std::optional<fs::path> log_dir;
        const auto* out_path = leaf->second.out;
        if (out_path != nullptr && !out_path->empty()) {
            const fs::path p(*out_path);
            log_dir = leaf->second.out_is_dir ? p : (p.has_parent_path() ? p.parent_path() : fs::path("."));
        } else if (!ctx.config.get("paths.output_dir").empty()) {
            log_dir = fs::path(ctx.config.get("paths.output_dir"));
        }
        ctx.log = make_logger(err, log_dir);
        std::string command;
        for (std::size_t i = 1; i < args.size(); ++i) command += (i > 1 ? " " : "") + args[i];
        ctx.log->info("tipscan {} {}", kToolVersion, command);
        ctx.log->info("config source: {}", config_path ? config_path->string() : "defaults");
        ctx.log->info("seed: {}", ctx.seed());
        for (const auto& [k, v] : ctx.config.values()) ctx.log->debug("config {} = {}", k, v);
        return leaf->second.run(ctx);
    } catch (const UsageError& e) {
        report_failure(ctx, err, e.what());
        return 2;
    } catch (const std::exception& e) {
        report_failure(ctx, err, e.what());
        return 1;
    }
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace tipscan
