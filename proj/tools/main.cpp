// watershed: command-line front end for the greedy 1-NN classifier.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "watershed/classifier.hpp"
#include "watershed/csv.hpp"
#include "watershed/datasets.hpp"
#include "watershed/evaluation.hpp"
#include "watershed/losses.hpp"
#include "watershed/model.hpp"
#include "watershed/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace watershed;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Global {
    unsigned threads = 0;
};

struct GenerateOpts {
    std::string out;
    std::uint64_t seed = 0;
    SpiralSpec spiral;
    MoonsSpec moons;
};

struct TrainOpts {
    std::string data;
    std::string out_model;
    std::string report;
    std::string loss = "watershed";
    TrainConfig config;
};

struct EvalOpts {
    std::string data;
    std::string model = "identity";
    std::string train_data;
    std::string out;
    EvalConfig config;
};

struct DiagnoseOpts {
    std::string data;
    std::string model;
    std::string out;
    std::size_t seeds_per_class = 1;
    std::uint64_t seed = 0;
};

struct GridOpts {
    std::string train_data;
    std::string model = "identity";
    std::string bounds;
    std::string resolution = "100";
    std::string out;
    EvalConfig config;
};

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

void write_manifest(const std::string& out, const std::string& command, json config, json outputs) {
    json m;
    m["tool"] = "watershed";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = std::move(config);
    m["outputs"] = std::move(outputs);
    std::ofstream f(manifest_path(out));
    if (!f) throw std::runtime_error("cannot write " + manifest_path(out));
    f << m.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

// "identity" builds a pass-through model for the given data.
Model resolve_model(const std::string& spec, const PointSet& data) {
    if (spec.empty() || spec == "identity") return Model::identity(data.dim(), data.num_classes());
    return load_model(spec);
}

bool fully_labelled(const PointSet& p) {
    return !p.labels.empty() && std::all_of(p.labels.begin(), p.labels.end(), [](ClassLabel l) { return l >= 0; });
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const auto& field : split_csv_line(text)) {
        double v = 0.0;
        if (!parse_double(field, v)) throw UsageError(std::string("bad value in ") + what + ": '" + field + "'");
        out.push_back(v);
    }
    return out;
}

GridSpec parse_grid(const GridOpts& o, const PointSet& train) {
    GridSpec g;
    if (o.bounds.empty()) {
        const RowVector lo = train.coords.colwise().minCoeff();
        const RowVector hi = train.coords.colwise().maxCoeff();
        const RowVector pad = 0.1 * (hi - lo);
        g.x_min = lo(0) - pad(0);
        g.x_max = hi(0) + pad(0);
        g.y_min = lo(1) - pad(1);
        g.y_max = hi(1) + pad(1);
    } else {
        const auto b = parse_list(o.bounds, "--bounds");
        if (b.size() != 4) throw UsageError("--bounds expects xmin,xmax,ymin,ymax");
        g.x_min = b[0];
        g.x_max = b[1];
        g.y_min = b[2];
        g.y_max = b[3];
    }
    std::string res = o.resolution;
    std::replace(res.begin(), res.end(), 'x', ',');
    const auto r = parse_list(res, "--resolution");
    if (r.empty() || r.size() > 2) throw UsageError("--resolution expects N or NXxNY");
    for (double v : r)
        if (v < 0 || v != std::floor(v)) throw UsageError("--resolution must be a whole number");
    g.nx = static_cast<std::size_t>(r[0]);
    g.ny = static_cast<std::size_t>(r.size() == 2 ? r[1] : r[0]);
    return g;
}

json eval_json(const EvalConfig& c) {
    return {{"n_batches", c.n_batches}, {"batch_size", c.batch_size}, {"seed", c.rng_seed}};
}

int run_generate(const std::string& kind, const GenerateOpts& o) {
    PointSet points;
    json config;
    if (kind == "spiral") {
        SpiralSpec s = o.spiral;
        s.rng_seed = o.seed;
        points = make_spiral(s);
        config = {{"dataset", "spiral"}, {"n_per_class", s.n_per_class}, {"n_rev", s.n_rev},
                  {"noise", s.noise_std}, {"seed", s.rng_seed}};
    } else {
        MoonsSpec s = o.moons;
        s.rng_seed = o.seed;
        points = make_moons(s);
        config = {{"dataset", "moons"}, {"n_samples", s.n_samples}, {"noise", s.noise_std}, {"seed", s.rng_seed}};
    }
    save_csv(o.out, points);
    write_manifest(o.out, "generate " + kind, config, {{"data", o.out}});
    std::cout << "wrote " << points.size() << " points to " << o.out << '\n';
    return 0;
}

int run_train(TrainOpts o) {
    o.config.loss_kind = parse_loss_kind(o.loss);
    const PointSet data = load_csv(o.data);
    const TrainReport report = train(data, o.config);
    save_model(o.out_model, report.model);
    const std::string report_path = o.report.empty() ? o.out_model + ".report.csv" : o.report;
    {
        auto f = open_out(report_path);
        write_report_csv(f, report);
    }
    const TrainConfig& c = o.config;
    write_manifest(o.out_model, "train",
                   {{"data", o.data},
                    {"loss", o.loss},
                    {"n_seeds", c.n_seeds},
                    {"batch_size", c.batch_size},
                    {"n_batches", c.batches_per_epoch},
                    {"embed_dim", c.embed_dim},
                    {"lr", c.learning_rate},
                    {"momentum", c.momentum},
                    {"epochs", c.max_epochs},
                    {"patience", c.patience},
                    {"valid_fraction", c.valid_fraction},
                    {"eval_batches", c.eval_batches},
                    {"per_batch_update", c.update_per_batch},
                    {"seed", c.rng_seed}},
                   {{"model", o.out_model}, {"report", report_path}});
    std::cout << "epochs " << report.epochs.size() << "\n"
              << "best_epoch " << report.best_epoch << "\n"
              << "valid_accuracy " << format_number(report.best_valid_accuracy) << '\n';
    return 0;
}

int run_eval(const EvalOpts& o) {
    const PointSet queries = load_csv(o.data);
    const PointSet train_set = load_csv(o.train_data.empty() ? o.data : o.train_data);
    if (!fully_labelled(train_set)) throw UsageError("reference data must be fully labelled");
    const Model model = resolve_model(o.model, train_set);
    const auto predicted = predict_model(model, queries.coords, train_set, o.config);
    const bool labelled = fully_labelled(queries);
    if (!o.out.empty()) {
        {
            auto f = open_out(o.out);
            write_predictions_csv(f, predicted, labelled ? std::span<const ClassLabel>(queries.labels)
                                                         : std::span<const ClassLabel>());
        }
        write_manifest(o.out, "eval",
                       {{"data", o.data}, {"model", o.model}, {"train_data", o.train_data.empty() ? o.data : o.train_data},
                        {"eval", eval_json(o.config)}},
                       {{"predictions", o.out}});
    }
    if (labelled) std::cout << "accuracy " << format_number(accuracy(predicted, queries.labels)) << '\n';
    std::cout << "predicted " << predicted.size() << " points\n";
    return 0;
}

int run_diagnose(const std::string& kind, const DiagnoseOpts& o) {
    const PointSet data = load_csv(o.data);
    const Model model = resolve_model(o.model, data);
    const Matrix z = model.transform(data.coords);

    std::ofstream file;
    if (!o.out.empty()) file = open_out(o.out);
    std::ostream& out = o.out.empty() ? std::cout : file;
    json summary;

    if (kind == "mst") {
        const SpanningTree tree = mst(z);
        write_tree_csv(out, tree);
        summary = {{"total_weight", tree.total_weight()}};
    } else if (kind == "cross-edges") {
        if (!fully_labelled(data)) throw UsageError("cross-edges needs labelled data");
        const std::size_t count = data.size() < 2 ? 0 : cross_edge_count(mst(z), data.labels);
        out << "cross_edges," << count << '\n';
        summary = {{"cross_edges", count}};
    } else if (kind == "margin") {
        if (!fully_labelled(data)) throw UsageError("margin needs labelled data");
        const MarginResult m = margin(z, data.labels);
        if (m.single_class()) {
            out << "margin,inf\n";
        } else {
            out << "margin," << format_number(m.value) << "\ni," << m.i << "\nj," << m.j << '\n';
        }
        summary = {{"margin", m.single_class() ? "inf" : format_number(m.value)}};
    } else {
        if (!fully_labelled(data)) throw UsageError("propagate needs labelled data to draw seeds from");
        Rng rng(o.seed);
        const auto seeds = sample_seeds(data.labels, o.seeds_per_class, data.num_classes(), rng);
        std::vector<ClassLabel> seeded(data.size(), kUnlabeled);
        for (const Seed& s : seeds) seeded[s.point_id] = s.label;
        const PropagationResult r = propagate(z, seeded, data.num_classes());
        write_order_csv(out, r);
        summary = {{"margin", format_number(r.margin)}, {"accuracy", format_number(accuracy(r.labels, data.labels))}};
        std::cerr << "margin " << format_number(r.margin) << "\naccuracy "
                  << format_number(accuracy(r.labels, data.labels)) << '\n';
    }
    if (!o.out.empty()) {
        write_manifest(o.out, "diagnose " + kind,
                       {{"data", o.data}, {"model", o.model.empty() ? "identity" : o.model},
                        {"seeds_per_class", o.seeds_per_class}, {"seed", o.seed}},
                       {{"result", o.out}, {"summary", summary}});
    }
    return 0;
}

int run_grid(const GridOpts& o) {
    const PointSet train_set = load_csv(o.train_data);
    if (!fully_labelled(train_set)) throw UsageError("training data must be fully labelled");
    const Model model = resolve_model(o.model, train_set);
    const GridSpec grid = parse_grid(o, train_set);
    const auto cells = export_boundary_grid(train_set, model, grid, o.config);
    {
        auto f = open_out(o.out);
        write_grid_csv(f, cells);
    }
    write_manifest(o.out, "grid",
                   {{"train_data", o.train_data}, {"model", o.model},
                    {"bounds", {grid.x_min, grid.x_max, grid.y_min, grid.y_max}},
                    {"resolution", {grid.nx, grid.ny}}, {"eval", eval_json(o.config)}},
                   {{"grid", o.out}});
    std::cout << "wrote " << cells.size() << " grid cells to " << o.out << '\n';
    return 0;
}

void add_eval_flags(CLI::App* cmd, EvalConfig& c) {
    cmd->add_option("--n-batches", c.n_batches, "Reference batches per query")->capture_default_str();
    cmd->add_option("--batch-size", c.batch_size, "Reference batch size")->capture_default_str();
    cmd->add_option("--seed", c.rng_seed, "Batch sampling seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greedy 1-NN (watershed) classifier toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Global global;
    app.add_option("--threads", global.threads, "Worker thread cap (0 = all cores)")
        ->envname("WATERSHED_THREADS")
        ->capture_default_str();

    // generate
    GenerateOpts gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
    generate->require_subcommand(1);
    auto* spiral = generate->add_subcommand("spiral", "Two interleaved spirals");
    spiral->add_option("--n-per-class", gen.spiral.n_per_class)->capture_default_str();
    spiral->add_option("--n-rev", gen.spiral.n_rev, "Revolutions around the origin")->capture_default_str();
    spiral->add_option("--noise", gen.spiral.noise_std)->capture_default_str();
    auto* moons = generate->add_subcommand("moons", "Two interleaving half circles");
    moons->add_option("--n", gen.moons.n_samples)->capture_default_str();
    moons->add_option("--noise", gen.moons.noise_std)->capture_default_str();
    for (auto* sub : {spiral, moons}) {
        sub->add_option("--seed", gen.seed)->capture_default_str();
        sub->add_option("--out", gen.out, "Output CSV")->required();
    }

    // train
    TrainOpts tr;
    auto* train_cmd = app.add_subcommand("train", "Train a linear embedding");
    train_cmd->add_option("--data", tr.data, "Labelled CSV")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--loss", tr.loss, "watershed, nca or linear")->capture_default_str();
    train_cmd->add_option("--n-seeds", tr.config.n_seeds)->capture_default_str();
    train_cmd->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
    train_cmd->add_option("--n-batches", tr.config.batches_per_epoch, "Batches per epoch")->capture_default_str();
    train_cmd->add_option("--embed-dim", tr.config.embed_dim)->capture_default_str();
    train_cmd->add_option("--lr", tr.config.learning_rate)->capture_default_str();
    train_cmd->add_option("--momentum", tr.config.momentum)->capture_default_str();
    train_cmd->add_option("--epochs", tr.config.max_epochs)->capture_default_str();
    train_cmd->add_option("--patience", tr.config.patience)->capture_default_str();
    train_cmd->add_option("--valid-fraction", tr.config.valid_fraction)->capture_default_str();
    train_cmd->add_option("--eval-batches", tr.config.eval_batches, "Vote batches for validation")
        ->capture_default_str();
    train_cmd->add_flag("--per-batch-update", tr.config.update_per_batch, "SGD step after every batch");
    train_cmd->add_option("--seed", tr.config.rng_seed)->capture_default_str();
    train_cmd->add_option("--out-model", tr.out_model, "Model file")->required();
    train_cmd->add_option("--report", tr.report, "Per-epoch CSV (default <out-model>.report.csv)");

    // eval
    EvalOpts ev;
    auto* eval_cmd = app.add_subcommand("eval", "Majority-vote 1-NN evaluation");
    eval_cmd->add_option("--data", ev.data, "Query CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--model", ev.model, "Model file or 'identity'")->capture_default_str();
    eval_cmd->add_option("--train-data", ev.train_data, "Reference CSV (default: --data)")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", ev.out, "Predictions CSV");
    add_eval_flags(eval_cmd, ev.config);

    // diagnose
    DiagnoseOpts dg;
    auto* diagnose = app.add_subcommand("diagnose", "MST, margin and propagation diagnostics");
    diagnose->require_subcommand(1);
    std::vector<CLI::App*> diag_subs;
    for (const char* name : {"mst", "cross-edges", "margin", "propagate"}) {
        auto* sub = diagnose->add_subcommand(name);
        sub->add_option("--data", dg.data, "CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--model", dg.model, "Model file (default identity)");
        sub->add_option("--out", dg.out, "Output CSV (default stdout)");
        if (std::string(name) == "propagate") {
            sub->add_option("--seeds-per-class", dg.seeds_per_class)->capture_default_str();
            sub->add_option("--seed", dg.seed)->capture_default_str();
        }
        diag_subs.push_back(sub);
    }

    // grid
    GridOpts gr;
    auto* grid_cmd = app.add_subcommand("grid", "Classify every cell of a 2-D grid independently");
    grid_cmd->add_option("--train-data", gr.train_data, "Labelled 2-D CSV")->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--model", gr.model, "Model file or 'identity'")->capture_default_str();
    grid_cmd->add_option("--bounds", gr.bounds, "xmin,xmax,ymin,ymax (default: data box + 10%)");
    grid_cmd->add_option("--resolution", gr.resolution, "N or NXxNY")->capture_default_str();
    grid_cmd->add_option("--out", gr.out, "Grid CSV")->required();
    add_eval_flags(grid_cmd, gr.config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        set_max_threads(global.threads);
        if (generate->parsed()) return run_generate(spiral->parsed() ? "spiral" : "moons", gen);
        if (train_cmd->parsed()) return run_train(tr);
        if (eval_cmd->parsed()) return run_eval(ev);
        if (grid_cmd->parsed()) return run_grid(gr);
        for (auto* sub : diag_subs)
            if (sub->parsed()) return run_diagnose(sub->get_name(), dg);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
