// Stand-in external predictor for the tests. Reads context lines on stdin and
// answers on stdout according to its mode:
//   echo    one chunk prediction per context, built from the first symbol
//   garbage a malformed line, then a valid one
//   vector  a vector prediction of the advertised dimension
//   silent  reads and never answers
//   exit    exits immediately

#include <iostream>
#include <string>

#include "json.hpp"

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "echo";
    const std::string tag = argc > 2 ? argv[2] : "ext";
    if (mode == "exit")
        return 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            continue;
        if (mode == "silent")
            continue;
        const long cycle = j.value("cycle", 0L);
        std::string first = "none";
        if (j.contains("symbols") && !j["symbols"].empty())
            first = j["symbols"][0].get<std::string>();
        if (mode == "garbage")
            std::cout << "{not json" << "\n";
        if (mode == "vector") {
            nlohmann::json v = nlohmann::json::array();
            for (long i = 0; i < j.value("dim", 0L); ++i)
                v.push_back(i == 0 ? 1.0 : 0.0);
            std::cout << nlohmann::json{{"type", "prediction"}, {"tag", tag}, {"salience", 0.5}, {"vector", v}}.dump()
                      << "\n";
        } else {
            nlohmann::json chunk{{"isa", "echo"},
                                 {"slots", {{"cycle", "c" + std::to_string(cycle)}, {"seen", first}}}};
            std::cout << nlohmann::json{{"type", "prediction"}, {"tag", tag}, {"salience", 0.8}, {"chunk", chunk},
                                        {"extra", "ignored"}}
                             .dump()
                      << "\n";
        }
        std::cout.flush();
    }
    return 0;
}
