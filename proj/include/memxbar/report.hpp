// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace memxbar::report {

/// Numeric table parsed from a CSV artifact with a header line.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const;
    [[nodiscard]] std::vector<double> numbers(const std::string& name) const;
};

/// Raises Error(MissingArtifact) when the text has no data rows.
Table parse_table(const std::string& csv, const std::string& what);

/// Inputs: epoch,mse
std::string learning_curve_svg(const Table& curve);
/// Inputs: trial,p_err,p_err_stimulus,p_err_extraneous
std::string boxplot_svg(const Table& trials, double x_p);
/// Inputs: layer,neuron,input,w_nominal,low,high,relative
std::string weight_bounds_svg(const Table& bounds);
/// Inputs: n_states,weight_states,p_err_rounded,p_err
std::string sweep_svg(const Table& sweep, double x_p);

/// Renders every chart whose source CSV exists under `run_dir` into
/// `out_dir`. Missing sources raise Error(MissingArtifact) naming the file.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& run_dir,
                                               const std::filesystem::path& out_dir, double x_p);

}  // namespace memxbar::report
