#pragma once

// Helpers shared by the test binaries.

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mmarch/mmarch.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return MMARCH_SOURCE_DIR; }
inline std::filesystem::path model_path(const std::string& name) { return source_dir() / "models" / name; }
inline std::filesystem::path golden_path(const std::string& name) { return source_dir() / "tests" / "golden" / name; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline mmarch::ModelDefinition bundled(const std::string& name) { return mmarch::load_model(model_path(name)); }

inline mmarch::Chunk chunk(std::string_view type,
                           std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
    mmarch::ChunkIds ids;
    auto c = mmarch::make_chunk(ids, type, slots);
    c.id = 0;
    return c;
}

inline mmarch::HoloVector random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    mmarch::HoloVector v(dim);
    for (auto& x : v.values)
        x = n(rng);
    return v;
}

} // namespace testing_support
