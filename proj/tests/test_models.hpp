// Shared model/input generators for tests.
#pragma once

#include <semigrad/bench.hpp>

namespace semigrad::testing {

inline Model random_mlp(Rng& rng, std::size_t depth, std::size_t width,
                        std::size_t d_in, std::size_t classes) {
    return build_mlp(depth, width, d_in, classes, rng);
}

inline Model random_cnn(Rng& rng) {
    Model m;
    m.layers.push_back(Layer::conv2d(1, 3, 3, 1, 1));  // 1x6x6 -> 3x6x6
    m.layers.push_back(Layer::relu());
    m.layers.push_back(Layer::maxpool2d(2));           // -> 3x3x3
    m.layers.push_back(Layer::flatten());
    m.layers.push_back(Layer::linear(27, 4));
    m.init_random(rng);
    return m;
}

struct Instance {
    Model model;
    Tensor x;
    std::vector<std::size_t> labels;
};

// Alternates MLP and CNN shapes, sized for fast fd checks.
inline Instance random_instance(std::uint64_t seed) {
    Rng rng(seed);
    Instance inst;
    if (seed % 2 == 0) {
        std::size_t depth = 2 + seed % 3;
        std::size_t width = 8 + rng.next_u64() % 24;
        std::size_t d_in = 6 + rng.next_u64() % 10;
        std::size_t classes = 2 + rng.next_u64() % 4;
        inst.model = random_mlp(rng, depth, width, d_in, classes);
        std::size_t B = 1 + rng.next_u64() % 4;
        inst.x = rng.uniform_tensor({B, d_in}, 0, 1);
        inst.labels.resize(B);
        for (auto& l : inst.labels) l = rng.next_u64() % classes;
    } else {
        inst.model = random_cnn(rng);
        std::size_t B = 1 + rng.next_u64() % 3;
        inst.x = rng.uniform_tensor({B, 1, 6, 6}, 0, 1);
        inst.labels.resize(B);
        for (auto& l : inst.labels) l = rng.next_u64() % 4;
    }
    return inst;
}

}  // namespace semigrad::testing
