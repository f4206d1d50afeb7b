// Command-line experiment runner. Reads a JSON experiment config, runs it,
// and writes CSV result tables ready for gnuplot or a spreadsheet.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "claga/experiments.hpp"

namespace {

std::string now_string() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void emit_plotscript(const std::filesystem::path& dir, const std::string& csv_name) {
    std::ofstream out(dir / "plot.gp");
    out << "# gnuplot script; filter the CSV by metric before plotting, e.g.:\n"
        << "#   grep discrepancy_vanilla " << csv_name << " > vanilla.dat\n"
        << "set datafile separator ','\n"
        << "set key outside\n"
        << "set ylabel 'metric value'\n"
        << "plot '" << csv_name << "' every ::1 using 4 with linespoints title 'values'\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CATE estimation experiments: meta-learners, CLAGA, diagnostics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::size_t threads = 1;
    bool plotscript = false;

    auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory for CSV files");
    run->add_option("--threads", threads, "max concurrent cells");
    run->add_flag("--emit-plotscript", plotscript, "write a generic gnuplot script");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = claga::load_experiment_config(config_path);
        const auto table = claga::run_experiment(cfg, threads);

        std::filesystem::create_directories(out_dir);
        const std::string csv_name = claga::to_string(cfg.kind) + ".csv";
        {
            std::ofstream out(std::filesystem::path(out_dir) / csv_name);
            claga::write_result_csv(out, table, now_string());
        }
        {
            // summary: aggregate rows only
            claga::ResultTable summary;
            for (const auto& r : table.rows)
                if (r.seed == "mean" || r.seed == "sd" || r.seed == "median" ||
                    r.seed == "aggregate")
                    summary.rows.push_back(r);
            std::ofstream out(std::filesystem::path(out_dir) / "summary.csv");
            claga::write_result_csv(out, summary, now_string());
        }
        if (plotscript) emit_plotscript(out_dir, csv_name);
        std::cout << "wrote " << csv_name << " and summary.csv to " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
