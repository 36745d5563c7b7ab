// apebench: designs, global GP fits, APE runs and report merging.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "apegp/bench.hpp"

namespace {

using namespace apegp;

void add_fit_flags(CLI::App* cmd, FitConfig& fc) {
    cmd->add_option("--jitter", fc.jitter, "Diagonal jitter for the correlation matrix")->check(CLI::NonNegativeNumber);
    cmd->add_option("--multistarts", fc.multistarts, "Optimizer restarts per fit")->check(CLI::Range(1, 1000000000));
    cmd->add_option("--max-evals", fc.max_evals, "Likelihood evaluations per restart")->check(CLI::Range(1, 1000000000));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-process emulation benchmarks: standard GP, sparse grids and the adaptive partitioning emulator"};
    app.require_subcommand(1);

    bench::DesignOptions design_opts;
    auto* design = app.add_subcommand("design", "Generate a design (CSV + JSON sidecar)");
    design->add_option("kind", design_opts.kind, "Generator: lhd or sgd")
        ->required()
        ->check(CLI::IsMember({"lhd", "sgd"}));
    design->add_option("--n", design_opts.n, "Number of points (lhd)")->check(CLI::Range(1, 1000000000));
    design->add_option("--d", design_opts.d, "Input dimension")->required()->check(CLI::Range(1, 1000000000));
    design->add_option("--eta", design_opts.eta, "Sparse-grid level, >= d (sgd)");
    design->add_option("--seed", design_opts.seed, "Master seed");
    design->add_option("--out", design_opts.out, "Output CSV path");

    bench::FitOptions fit_opts;
    std::string fit_method = "standard-gp";
    auto* fitc = app.add_subcommand("fit", "Fit one global GP and score it on the test set");
    fitc->add_option("--function", fit_opts.function, "Target name (corner-peak-10d, franke-2d, franke-4d)");
    fitc->add_option("--data", fit_opts.data, "Tabulated training data CSV (x1..xd,y)");
    fitc->add_option("--test-data", fit_opts.test_data, "Tabulated test data CSV (x1..xd,y)");
    fitc->add_option("--design", fit_opts.design, "Design CSV");
    fitc->add_option("--method", fit_method, "standard-gp or sgd")->check(CLI::IsMember({"standard-gp", "sgd"}));
    fitc->add_option("--n", fit_opts.n, "LHD size when no design is given")->check(CLI::Range(1, 1000000000));
    fitc->add_option("--eta", fit_opts.eta, "Sparse-grid level when no design is given");
    fitc->add_option("--n-test", fit_opts.n_test, "Test-set size")->check(CLI::Range(2, 100000000));
    fitc->add_option("--seed", fit_opts.seed, "Master seed");
    fitc->add_option("--out", fit_opts.out, "Output directory");
    add_fit_flags(fitc, fit_opts.fit);

    bench::ApeOptions ape_opts;
    std::string loo = "closed-form";
    std::string measure = "mse";
    auto* apec = app.add_subcommand("ape", "Run the adaptive partitioning emulator");
    apec->add_option("--function", ape_opts.function, "Target name")->required();
    apec->add_option("--n0", ape_opts.n0, "Initial design size")->check(CLI::Range(1, 1000000000));
    apec->add_option("--N", ape_opts.N, "Stop once the design reaches this size")->check(CLI::Range(1, 1000000000));
    apec->add_option("--checkpoints", ape_opts.checkpoints, "Design sizes at which to score the emulator")
        ->delimiter(',');
    apec->add_option("--seed", ape_opts.seed, "Master seed");
    apec->add_option("--n-test", ape_opts.n_test, "Test-set size")->check(CLI::Range(2, 100000000));
    apec->add_option("--loo-mode", loo, "closed-form or full-refit")->check(CLI::IsMember({"closed-form", "full-refit"}));
    apec->add_option("--error-measure", measure, "mse or max-abs")->check(CLI::IsMember({"mse", "max-abs"}));
    apec->add_option("--out", ape_opts.out, "Output directory");
    add_fit_flags(apec, ape_opts.fit);

    bench::ReportOptions report_opts;
    auto* report = app.add_subcommand("report", "Merge and sort record CSVs");
    report->add_option("inputs", report_opts.inputs, "Record CSV files")->required()->check(CLI::ExistingFile);
    report->add_option("--out", report_opts.out, "Output CSV path");
    report->add_flag("--log", report_opts.log_columns, "Add log10 columns for log-log plots");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*design) {
            std::cout << bench::cmd_design(design_opts).string() << '\n';
        } else if (*fitc) {
            fit_opts.method = fit_method == "sgd" ? bench::Method::SGDFit : bench::Method::StandardGP;
            if (fit_opts.function.empty() && fit_opts.data.empty()) throw InvalidArgument("fit: give --function or --data");
            const auto out = bench::cmd_fit(fit_opts);
            std::cout << io::kRecordHeader << '\n' << io::record_row(out.record) << '\n';
        } else if (*apec) {
            ape_opts.loo_mode = loo == "full-refit" ? LooMode::FullRefit : LooMode::ClosedForm;
            ape_opts.error_measure = measure == "max-abs" ? ErrorMeasure::MaxAbs : ErrorMeasure::MSE;
            const auto out = bench::cmd_ape(ape_opts);
            std::cout << io::kRecordHeader << '\n';
            for (const auto& r : out.records) std::cout << io::record_row(r) << '\n';
            if (!out.missed.empty()) {
                std::cerr << "error: run ended at n=" << out.result.size() << " before checkpoint " << out.missed.front()
                          << '\n';
                return 1;
            }
        } else if (*report) {
            const auto recs = bench::cmd_report(report_opts);
            std::cout << recs.size() << " records\n";
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
