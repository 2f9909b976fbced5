#pragma once

#include <functional>
#include <iomanip>

#include "semigrad/advtrain.hpp"
#include "semigrad/dataset.hpp"

namespace semigrad {

// Model presets: "mlp-<layers>x<width>" (e.g. mlp-8x1024) and "cnn-small".
// MLP presets take flat (B, d) input; cnn-small takes (B, 1, 8, 8).
struct Preset {
    std::string name;
    std::size_t input_dim = 0;           // flat input size
    std::vector<std::size_t> input_shape;  // per-sample shape
    std::size_t num_classes = 10;
    std::function<Model(Rng&)> build;
};

inline Model build_mlp(std::size_t layers, std::size_t width, std::size_t d_in,
                       std::size_t classes, Rng& rng) {
    if (layers < 1) throw std::invalid_argument("mlp preset: layers < 1");
    Model m;
    std::size_t prev = d_in;
    for (std::size_t i = 0; i + 1 < layers; ++i) {
        m.layers.push_back(Layer::linear(prev, width));
        m.layers.push_back(Layer::relu());
        prev = width;
    }
    m.layers.push_back(Layer::linear(prev, classes));
    m.init_random(rng);
    return m;
}

inline Model build_cnn_small(Rng& rng) {
    Model m;
    m.layers.push_back(Layer::conv2d(1, 8, 3, 1, 1));   // 1x8x8 -> 8x8x8
    m.layers.push_back(Layer::relu());
    m.layers.push_back(Layer::conv2d(8, 16, 3, 1, 1));  // -> 16x8x8
    m.layers.push_back(Layer::relu());
    m.layers.push_back(Layer::maxpool2d(2));            // -> 16x4x4
    m.layers.push_back(Layer::conv2d(16, 16, 3, 1, 1)); // -> 16x4x4
    m.layers.push_back(Layer::relu());
    m.layers.push_back(Layer::flatten());               // -> 256
    m.layers.push_back(Layer::linear(256, 10));
    m.init_random(rng);
    return m;
}

inline Preset parse_preset(const std::string& name, std::size_t input_dim = 64,
                           std::size_t num_classes = 10) {
    Preset p;
    p.name = name;
    p.num_classes = num_classes;
    if (name == "cnn-small") {
        p.input_dim = 64;
        p.input_shape = {1, 8, 8};
        p.build = [](Rng& rng) { return build_cnn_small(rng); };
        return p;
    }
    if (name.rfind("mlp-", 0) == 0) {
        std::size_t xpos = name.find('x', 4);
        if (xpos == std::string::npos)
            throw std::invalid_argument("unknown preset '" + name +
                                        "' (expected mlp-<L>x<W> or cnn-small)");
        std::size_t layers = std::stoul(name.substr(4, xpos - 4));
        std::size_t width = std::stoul(name.substr(xpos + 1));
        p.input_dim = input_dim;
        p.input_shape = {input_dim};
        p.build = [layers, width, input_dim, num_classes](Rng& rng) {
            return build_mlp(layers, width, input_dim, num_classes, rng);
        };
        return p;
    }
    throw std::invalid_argument("unknown preset '" + name +
                                "' (expected mlp-<L>x<W> or cnn-small)");
}

struct BenchSpec {
    std::string preset = "mlp-8x1024";
    std::vector<std::size_t> batch_sizes = {16};
    std::vector<std::size_t> step_counts = {50};
    std::size_t repeats = 10;
    std::size_t warmup = 1;
    double epsilon = 0.1;
    std::uint64_t seed = 42;

    void validate() const {
        if (repeats < 3) throw std::invalid_argument("bench: repeats < 3");
        if (warmup < 1) throw std::invalid_argument("bench: warmup < 1");
        if (batch_sizes.empty() || step_counts.empty())
            throw std::invalid_argument("bench: empty sweep");
    }
};

struct BenchRow {
    std::string model;
    std::size_t batch = 0;
    std::size_t K = 0;
    std::string mode;
    std::uint64_t fwd_flops = 0;
    std::uint64_t bwd_flops = 0;
    std::size_t peak_bytes = 0;
    std::uint64_t wall_ns_median = 0;
    std::uint64_t wall_ns_std = 0;
    double speedup = 0.0;  // filled on semi rows once both modes are measured
    bool noisy = false;
};

inline std::uint64_t median_u64(std::vector<std::uint64_t> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

inline std::uint64_t stddev_u64(const std::vector<std::uint64_t>& v) {
    double mean = 0.0;
    for (auto x : v) mean += static_cast<double>(x);
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (auto x : v) {
        double d = static_cast<double>(x) - mean;
        acc += d * d;
    }
    return static_cast<std::uint64_t>(
        std::sqrt(acc / static_cast<double>(v.size())));
}

// Times K-step PGD in both modes for every (batch, K) pair. Warmup runs are
// discarded; the median and stddev over `repeats` timed runs are reported.
// A speedup is only attached when the timing is clean (stddev/median < 15%).
inline std::vector<BenchRow> run_bench(const BenchSpec& spec) {
    spec.validate();
    Preset preset = parse_preset(spec.preset);
    Rng rng(spec.seed);
    Model model = preset.build(rng);

    std::vector<BenchRow> rows;
    for (std::size_t B : spec.batch_sizes) {
        std::vector<std::size_t> xshape = {B};
        xshape.insert(xshape.end(), preset.input_shape.begin(),
                      preset.input_shape.end());
        Tensor x = rng.uniform_tensor(xshape, 0.0, 1.0);
        std::vector<std::size_t> y(B);
        for (auto& l : y) l = rng.next_u64() % preset.num_classes;

        for (std::size_t K : spec.step_counts) {
            BenchRow full_row, semi_row;
            for (GradMode mode : {GradMode::Full, GradMode::Semi}) {
                AttackConfig cfg = AttackConfig::pgd_default(spec.epsilon, K, mode);
                std::vector<std::uint64_t> times;
                CostReport last_cost;
                for (std::size_t r = 0; r < spec.warmup + spec.repeats; ++r) {
                    AttackResult res = pgd(model, x, y, cfg);
                    if (r >= spec.warmup) times.push_back(res.cost.wall_ns);
                    last_cost = res.cost;
                }
                BenchRow row;
                row.model = spec.preset;
                row.batch = B;
                row.K = K;
                row.mode = mode == GradMode::Full ? "full" : "semi";
                row.fwd_flops = last_cost.forward_flops;
                row.bwd_flops = last_cost.backward_flops;
                row.peak_bytes = last_cost.peak_bytes;
                row.wall_ns_median = median_u64(times);
                row.wall_ns_std = stddev_u64(times);
                row.noisy = row.wall_ns_std * 100 >= row.wall_ns_median * 15;
                (mode == GradMode::Full ? full_row : semi_row) = row;
            }
            if (!full_row.noisy && !semi_row.noisy && semi_row.wall_ns_median > 0)
                semi_row.speedup = static_cast<double>(full_row.wall_ns_median) /
                                   static_cast<double>(semi_row.wall_ns_median);
            rows.push_back(full_row);
            rows.push_back(semi_row);
        }
    }
    return rows;
}

inline std::string bench_csv_header() {
    return "model,batch,K,mode,fwd_flops,bwd_flops,peak_bytes,"
           "wall_ns_median,wall_ns_std,speedup";
}

inline std::string to_csv(const BenchRow& r) {
    std::ostringstream os;
    os << r.model << ',' << r.batch << ',' << r.K << ',' << r.mode << ','
       << r.fwd_flops << ',' << r.bwd_flops << ',' << r.peak_bytes << ','
       << r.wall_ns_median << ',' << r.wall_ns_std << ',';
    if (r.noisy)
        os << "noisy";
    else if (r.speedup > 0.0)
        os << std::fixed << std::setprecision(4) << r.speedup;
    return os.str();
}

}  // namespace semigrad
