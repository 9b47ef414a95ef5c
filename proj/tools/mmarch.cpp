// mmarch: run, step through, inspect and validate models; compute metrics
// from trace files.
//
//   mmarch run --model M --cycles N [--mode mm|pipeline] [--seed S] [--trace T] [--metrics F]
//   mmarch step --model M [--mode ..] [--seed S] [--trace T]     (commands on stdin)
//   mmarch inspect --model M [--cycles N] [--top K]
//   mmarch validate --model M
//   mmarch metrics --trace T
//
// Exit status: 0 ok, 1 invalid model or runtime failure, 2 bad usage.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mmarch/mmarch.hpp"

namespace {

struct Common {
    std::string model;
    std::string mode = "mm";
    std::uint64_t seed = 0;
    std::string trace;
};

void add_common(CLI::App* cmd, Common& c, bool with_trace) {
    cmd->add_option("--model", c.model, "model definition file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mode", c.mode, "mm or pipeline")->check(CLI::IsMember({"mm", "pipeline"}));
    cmd->add_option("--seed", c.seed, "run seed");
    if (with_trace)
        cmd->add_option("--trace", c.trace, "trace output file");
}

mmarch::RunOptions options_of(const Common& c) {
    return mmarch::RunOptions{*mmarch::parse_mode(c.mode), c.seed, {}};
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw mmarch::error("cannot write " + path);
    out << text;
}

std::string metrics_text(const mmarch::Trace& t) {
    return mmarch::metrics_to_json(mmarch::compute_metrics(t)).dump(2) + "\n";
}

int cmd_run(const Common& c, std::int64_t cycles, const std::string& metrics_path) {
    mmarch::Runtime rt(mmarch::load_model(c.model), options_of(c));
    const mmarch::Trace& t = rt.run(cycles);
    if (!c.trace.empty())
        write_file(c.trace, mmarch::trace_text(t));
    if (!metrics_path.empty())
        write_file(metrics_path, metrics_text(t));
    auto m = mmarch::compute_metrics(t);
    std::cout << rt.model().name << ": " << m.cycles << " cycles, " << m.central_fires << " central fires, "
              << "mean candidates " << m.candidates_mean << ", halt " << m.halt_reason << "\n";
    return 0;
}

int cmd_step(const Common& c) {
    mmarch::Runtime rt(mmarch::load_model(c.model), options_of(c));
    std::string line;
    while (std::getline(std::cin, line)) {
        std::istringstream in(line);
        std::string verb;
        if (!(in >> verb))
            continue;
        if (verb == "quit" || verb == "exit")
            break;
        if (verb == "step") {
            std::int64_t n = 1;
            in >> n;
            for (std::int64_t i = 0; i < n && !rt.halted(); ++i)
                rt.step();
            std::cout << "cycle " << rt.cycle() << (rt.halted() ? " halted" : "") << "\n";
        } else if (verb == "inspect") {
            std::size_t k = 5;
            in >> k;
            std::cout << rt.inspect(k);
        } else {
            std::cout << "commands: step [n] | inspect [k] | quit\n";
        }
    }
    const mmarch::Trace& t = rt.finish();
    if (!c.trace.empty())
        write_file(c.trace, mmarch::trace_text(t));
    return 0;
}

int cmd_inspect(const Common& c, std::int64_t cycles, std::size_t top) {
    mmarch::Runtime rt(mmarch::load_model(c.model), options_of(c));
    for (std::int64_t i = 0; i < cycles && !rt.halted(); ++i)
        rt.step();
    std::cout << rt.inspect(top);
    return 0;
}

int cmd_metrics(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw mmarch::error("cannot open " + path);
    std::cout << metrics_text(mmarch::read_trace(in));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"middle-memory cognitive architecture runtime", "mmarch"};
    app.require_subcommand(1);

    Common run_opts;
    std::int64_t run_cycles = 200;
    std::string run_metrics;
    auto* run = app.add_subcommand("run", "run a model for a number of cycles");
    add_common(run, run_opts, true);
    run->add_option("--cycles", run_cycles, "cycles to run")->check(CLI::NonNegativeNumber);
    run->add_option("--metrics", run_metrics, "metrics output file");

    Common step_opts;
    auto* step = app.add_subcommand("step", "step a model interactively (commands on stdin)");
    add_common(step, step_opts, true);

    Common inspect_opts;
    std::int64_t inspect_cycles = 0;
    std::size_t inspect_top = 5;
    auto* inspect = app.add_subcommand("inspect", "print the state after some cycles");
    add_common(inspect, inspect_opts, false);
    inspect->add_option("--cycles", inspect_cycles, "cycles to run first")->check(CLI::NonNegativeNumber);
    inspect->add_option("--top", inspect_top, "middle-memory entries to list");

    std::string validate_model;
    auto* validate = app.add_subcommand("validate", "check a model and print its canonical form");
    validate->add_option("--model", validate_model, "model definition file")->required()->check(CLI::ExistingFile);

    std::string metrics_trace;
    auto* metrics = app.add_subcommand("metrics", "compute run metrics from a trace file");
    metrics->add_option("--trace", metrics_trace, "trace file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*run)
            return cmd_run(run_opts, run_cycles, run_metrics);
        if (*step)
            return cmd_step(step_opts);
        if (*inspect)
            return cmd_inspect(inspect_opts, inspect_cycles, inspect_top);
        if (*validate) {
            std::cout << mmarch::write_model(mmarch::load_model(validate_model)).dump(2) << "\n";
            return 0;
        }
        if (*metrics)
            return cmd_metrics(metrics_trace);
    } catch (const mmarch::model_invalid& e) {
        std::cerr << e.what();
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
