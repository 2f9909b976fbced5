// Command-line driver: adversarial attacks, PGD speedup benchmarks, and
// adversarial training, with CSV cost reports.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <semigrad/bench.hpp>

namespace {

constexpr int kExitBadFlags = 2;
constexpr int kExitLoadFailure = 3;
constexpr int kExitNumericFailure = 4;

using namespace semigrad;

std::uint64_t fnv1a(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
    for (std::size_t i = 0; i < t.bytes(); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

int thread_cap() {
    const char* env = std::getenv("SEMIGRAD_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    if (n < 1) throw CLI::ValidationError("SEMIGRAD_THREADS must be >= 1");
    return n;
}

struct DataArgs {
    std::string spec = "synthetic";
    std::uint64_t seed = 7;
    std::size_t classes = 2;
    std::size_t samples = 100;
    std::size_t dim = 64;
};

Dataset load_data(const DataArgs& a) {
    if (a.spec == "synthetic")
        return synthetic_blobs(a.seed, a.classes, a.samples / std::max<std::size_t>(a.classes, 1), a.dim);
    auto colon = a.spec.find(':');
    if (colon != std::string::npos) {
        Dataset ds;
        ds.features = load_idx_images(a.spec.substr(0, colon));
        ds.labels = load_idx_labels(a.spec.substr(colon + 1));
        if (ds.features.shape[0] != ds.labels.size())
            throw std::runtime_error("idx: image count " +
                                     std::to_string(ds.features.shape[0]) +
                                     " != label count " +
                                     std::to_string(ds.labels.size()));
        for (std::size_t l : ds.labels)
            ds.num_classes = std::max(ds.num_classes, l + 1);
        return ds;
    }
    return load_csv(a.spec);
}

Model load_model(const std::string& spec, std::size_t input_dim,
                 std::size_t classes, std::uint64_t seed) {
    if (std::filesystem::exists(spec)) return load_checkpoint(spec);
    Preset p = parse_preset(spec, input_dim, classes);
    Rng rng(seed);
    return p.build(rng);
}

Tensor take_batch(const Dataset& ds, std::size_t batch,
                  std::vector<std::size_t>& labels_out) {
    std::size_t B = std::min(batch, ds.features.shape[0]);
    std::vector<std::size_t> shape = ds.features.shape;
    shape[0] = B;
    std::size_t per = ds.features.numel() / ds.features.shape[0];
    Tensor x = Tensor::zeros(shape);
    std::copy(ds.features.data.begin(), ds.features.data.begin() + B * per,
              x.data.begin());
    labels_out.assign(ds.labels.begin(), ds.labels.begin() + B);
    return x;
}

void write_report(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open output file " + path);
    os << content;
}

int cmd_attack(const std::string& model_spec, const DataArgs& data_args,
               const std::string& attack_name, double eps, double eta,
               std::size_t steps, const std::string& mode_name,
               std::uint64_t seed, std::size_t batch, const std::string& out) {
    Dataset ds = load_data(data_args);
    std::size_t dim = ds.features.numel() / ds.features.shape[0];
    Model model = load_model(model_spec, dim, ds.num_classes, seed);

    std::vector<std::size_t> labels;
    Tensor x = take_batch(ds, batch, labels);
    if (model.layers.front().kind == LayerKind::Conv2d && x.ndim() == 2)
        throw std::runtime_error("model expects image input but data is flat");

    GradMode mode = mode_name == "full" ? GradMode::Full : GradMode::Semi;
    AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.steps = steps;
    cfg.eta = {eta > 0 ? eta : (steps > 1 ? eps / 4.0 : std::max(eps, 1e-12))};
    cfg.mode = mode;
    cfg.clamp_range = {{0.0, 1.0}};
    cfg.seed = seed;

    AttackResult res;
    if (attack_name == "fgsm")
        res = fgsm(model, x, labels, eps, mode);
    else if (attack_name == "bim")
        res = bim(model, x, labels, cfg);
    else
        res = pgd(model, x, labels, cfg);

    std::ostringstream report;
    report << bench_csv_header() << '\n';
    BenchRow row;
    row.model = model_spec;
    row.batch = x.shape[0];
    row.K = steps;
    row.mode = mode_name;
    row.fwd_flops = res.cost.forward_flops;
    row.bwd_flops = res.cost.backward_flops;
    row.peak_bytes = res.cost.peak_bytes;
    row.wall_ns_median = res.cost.wall_ns;
    report << to_csv(row) << '\n';
    write_report(out, report.str());

    std::cout << "attack=" << attack_name << " mode=" << mode_name
              << " steps=" << steps << " eps=" << eps << '\n'
              << "loss_start=" << res.loss_trace.front()
              << " loss_end=" << res.loss_trace.back() << '\n'
              << "linf=" << linf_norm(res.perturbation) << " perturbation_hash="
              << std::hex << fnv1a(res.perturbation) << std::dec << '\n'
              << "fwd_flops=" << res.cost.forward_flops
              << " bwd_flops=" << res.cost.backward_flops
              << " peak_bytes=" << res.cost.peak_bytes
              << " wall_ns=" << res.cost.wall_ns << '\n';
    return 0;
}

int cmd_bench(const BenchSpec& spec, const std::string& out) {
    std::vector<BenchRow> rows = run_bench(spec);
    std::ostringstream report;
    report << bench_csv_header() << '\n';
    for (const auto& r : rows) report << to_csv(r) << '\n';
    write_report(out, report.str());
    if (!out.empty()) {
        for (const auto& r : rows)
            if (r.mode == "semi" && r.speedup > 0.0)
                std::cout << "batch=" << r.batch << " K=" << r.K
                          << " speedup=" << r.speedup << '\n';
    }
    return 0;
}

int cmd_train(const std::string& model_spec, const DataArgs& data_args,
              const std::vector<std::size_t>& k_list, std::size_t epochs,
              const std::string& toggle, bool verify, double eps, double lr,
              std::size_t batch, std::uint64_t seed, const std::string& out) {
    Dataset ds = load_data(data_args);
    std::size_t dim = ds.features.numel() / ds.features.shape[0];

    std::ostringstream report;
    report << "K,toggle_semi,epoch,flops,wall_ns,mean_loss\n";

    for (std::size_t K : k_list) {
        std::vector<bool> toggles;
        if (toggle == "on")
            toggles = {true};
        else if (toggle == "off")
            toggles = {false};
        else
            toggles = {false, true};  // "both": baseline first

        std::vector<Model> finals;
        for (bool t : toggles) {
            Model model = load_model(model_spec, dim, ds.num_classes, seed);
            TrainConfig cfg;
            cfg.attack = AttackConfig::pgd_default(eps, K);
            cfg.optimizer.lr = lr;
            cfg.batch_size = batch;
            cfg.toggle_semi = t;
            SgdOptimizer opt(cfg.optimizer);
            Tensor features = ds.features;
            for (std::size_t e = 0; e < epochs; ++e) {
                EpochCost ec = adv_train_epoch(model, opt, features, ds.labels, cfg);
                report << K << ',' << (t ? "on" : "off") << ',' << e << ','
                       << ec.flops << ',' << ec.wall_ns << ',' << ec.mean_loss
                       << '\n';
            }
            finals.push_back(std::move(model));
        }
        if (verify && finals.size() == 2) {
            bool same = true;
            for (std::size_t li = 0; li < finals[0].layers.size(); ++li)
                for (std::size_t pi = 0; pi < finals[0].layers[li].params.size(); ++pi)
                    same = same && bitwise_equal(
                                       finals[0].layers[li].params[pi].value,
                                       finals[1].layers[li].params[pi].value);
            if (!same)
                throw std::runtime_error(
                    "verify failed: models diverged across toggle settings at K=" +
                    std::to_string(K));
            std::cout << "K=" << K << " models identical\n";
        }
    }
    write_report(out, report.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-backward adversarial perturbation toolkit"};
    app.require_subcommand(1);

    DataArgs data_args;
    std::string model_spec = "mlp-4x256";
    std::string out;
    std::uint64_t seed = 42;

    auto add_data_flags = [&](CLI::App* sub) {
        sub->add_option("--data", data_args.spec,
                        "synthetic | file.csv | images.idx:labels.idx");
        sub->add_option("--data-seed", data_args.seed);
        sub->add_option("--classes", data_args.classes);
        sub->add_option("--samples", data_args.samples);
        sub->add_option("--dim", data_args.dim);
        sub->add_option("--seed", seed);
        sub->add_option("--out", out, "CSV report path (stdout if omitted)");
    };

    // attack
    auto* atk = app.add_subcommand("attack", "run one adversarial attack");
    std::string attack_name = "pgd", mode_name = "semi";
    double eps = 0.1, eta = 0.0;
    std::size_t steps = 10, batch = 16;
    atk->add_option("--model", model_spec, "preset (mlp-<L>x<W>, cnn-small) or checkpoint");
    atk->add_option("--attack", attack_name)
        ->check(CLI::IsMember({"fgsm", "pgd", "bim"}));
    atk->add_option("--eps", eps)->check(CLI::NonNegativeNumber);
    atk->add_option("--eta", eta);
    atk->add_option("--steps", steps)->check(CLI::PositiveNumber);
    atk->add_option("--mode", mode_name)->check(CLI::IsMember({"full", "semi"}));
    atk->add_option("--batch", batch)->check(CLI::PositiveNumber);
    add_data_flags(atk);

    // bench
    auto* bench = app.add_subcommand("bench", "PGD full-vs-semi timing sweep");
    BenchSpec spec;
    bench->add_option("--model", spec.preset);
    bench->add_option("--batch", spec.batch_sizes, "batch size sweep");
    bench->add_option("--K", spec.step_counts, "PGD step sweep");
    bench->add_option("--repeats", spec.repeats)->check(CLI::Range(3, 1000));
    bench->add_option("--warmup", spec.warmup)->check(CLI::PositiveNumber);
    bench->add_option("--eps", spec.epsilon)->check(CLI::NonNegativeNumber);
    bench->add_option("--seed", spec.seed);
    bench->add_option("--out", out);

    // train
    auto* train = app.add_subcommand("train", "adversarial training with cost report");
    std::vector<std::size_t> k_list = {5};
    std::size_t epochs = 1, train_batch = 16;
    std::string toggle = "both";
    bool verify = false;
    double lr = 0.05;
    train->add_option("--model", model_spec);
    train->add_option("--K", k_list, "attack step sweep");
    train->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    train->add_option("--toggle-semi", toggle)
        ->check(CLI::IsMember({"on", "off", "both"}));
    train->add_flag("--verify", verify, "assert bitwise model equality across toggles");
    train->add_option("--eps", eps)->check(CLI::NonNegativeNumber);
    train->add_option("--lr", lr)->check(CLI::PositiveNumber);
    train->add_option("--batch", train_batch)->check(CLI::PositiveNumber);
    add_data_flags(train);

    try {
        app.parse(argc, argv);
        thread_cap();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitBadFlags;
    }

    try {
        if (*atk)
            return cmd_attack(model_spec, data_args, attack_name, eps, eta, steps,
                              mode_name, seed, batch, out);
        if (*bench) return cmd_bench(spec, out);
        if (*train)
            return cmd_train(model_spec, data_args, k_list, epochs, toggle, verify,
                             eps, lr, train_batch, seed, out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid-argument: " << e.what() << '\n';
        return kExitBadFlags;
    } catch (const std::runtime_error& e) {
        std::string what = e.what();
        bool load = what.find("idx:") == 0 || what.find("csv:") == 0 ||
                    what.find("checkpoint:") == 0 ||
                    what.find("cannot open") != std::string::npos;
        std::cerr << "error: " << (load ? "load" : "numeric") << ": " << what
                  << '\n';
        return load ? kExitLoadFailure : kExitNumericFailure;
    }
    return kExitBadFlags;
}
