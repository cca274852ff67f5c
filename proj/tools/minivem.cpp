// Command-line driver: mesh generation and checks, single solves, convergence studies
// and conditioning sweeps.

#include "minivem/minivem.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace minivem;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    if (out.empty()) throw UsageError("empty list '" + s + "'");
    return out;
}

int parse_int(const std::string& s)
{
    std::size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw UsageError("not an integer: '" + s + "'");
    }
    if (pos != s.size()) throw UsageError("not an integer: '" + s + "'");
    return v;
}

/// "1..4", "1,2,5" or combinations such as "1..3,5".
std::vector<int> parse_int_list(const std::string& s)
{
    std::vector<int> out;
    for (const auto& item : split_list(s)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_int(item));
            continue;
        }
        const int a = parse_int(item.substr(0, dots)), b = parse_int(item.substr(dots + 2));
        if (b < a) throw UsageError("empty range '" + item + "'");
        for (int i = a; i <= b; ++i) out.push_back(i);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s)
{
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw UsageError("not a number: '" + item + "'");
        }
        if (pos != item.size()) throw UsageError("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

template <class T, class Parse>
std::vector<T> parse_enum_list(const std::string& s, Parse parse)
{
    std::vector<T> out;
    for (const auto& item : split_list(s)) {
        try {
            out.push_back(parse(item));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    return out;
}

void check_level(MeshFamily fam, int level)
{
    if (level < 1 || level > max_level(fam))
        throw UsageError("level " + std::to_string(level) + " is not available for family " + to_string(fam) + " (1.." +
                         std::to_string(max_level(fam)) + ")");
}

/// Writes to `path`, or to stdout when the path is empty or "-".
template <class Writer>
void with_output(const std::string& path, Writer write)
{
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write(out);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string case_output_path(const std::string& path, const std::string& case_id)
{
    const std::filesystem::path p(path);
    std::filesystem::path out = p.parent_path() / (p.stem().string() + "_" + case_id + p.extension().string());
    return out.string();
}

struct CommonOptions {
    std::string basis = "ortho";
    double alpha = 1.0;
    double beta_sharp = 0.0;
    std::string pressure_scaling = "area";
    std::uint64_t seed = 42;

    StabilizationConfig stabilization() const
    {
        StabilizationConfig s;
        s.alpha = alpha;
        s.beta_sharp = beta_sharp;
        try {
            s.pressure_scaling = parse_pressure_scaling(pressure_scaling);
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        return s;
    }
};

void add_common(CLI::App* app, CommonOptions& o, bool with_basis = true)
{
    if (with_basis) app->add_option("--basis", o.basis, "Polynomial basis: ortho or monomial")->capture_default_str();
    app->add_option("--alpha", o.alpha, "Pressure stabilization weight (> 0)")->capture_default_str();
    app->add_option("--beta-sharp", o.beta_sharp, "Bubble stabilization weight (>= 0)")->capture_default_str();
    app->add_option("--pressure-scaling", o.pressure_scaling, "Pressure stabilization scaling: area or none")
        ->capture_default_str();
    app->add_option("--seed", o.seed, "Seed for randomized mesh families")->capture_default_str();
}

BasisKind basis_or_usage(const std::string& s)
{
    try {
        return parse_basis_kind(s);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

MeshFamily family_or_usage(const std::string& s)
{
    try {
        return parse_family(s);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void print_report(std::ostream& out, const GeometryReport& rep, const PolygonalMesh& mesh)
{
    out << "vertices " << mesh.num_vertices() << "\nedges " << mesh.num_edges() << "\ncells " << mesh.num_cells()
        << "\nh " << format_double(mesh.h) << "\narea " << format_double(mesh.total_area()) << '\n';
    double min_star = 1.0, min_dist = 1.0;
    for (const auto& c : rep.cells) {
        min_star = std::min(min_star, c.rho1);
        min_dist = std::min(min_dist, c.rho2);
    }
    out << "min_star_ratio " << format_double(min_star) << "\nmin_vertex_distance_ratio " << format_double(min_dist)
        << "\nflagged_cells " << rep.flagged.size() << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MINI virtual element solver for the 2D Stokes problem"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    // ---- mesh ----
    auto* mesh_cmd = app.add_subcommand("mesh", "Generate or check polygonal meshes");
    mesh_cmd->require_subcommand(1);
    std::string family = "hexagonal", mesh_path, out_path;
    int level = 1;
    std::uint64_t seed = 42;
    double rho1 = 0.1, rho2 = 0.01;

    auto* gen_cmd = mesh_cmd->add_subcommand("generate", "Write a generated mesh as JSON");
    gen_cmd->add_option("--family", family, "hexagonal, voronoi, random_polygons or diamond")->capture_default_str();
    gen_cmd->add_option("--level", level, "Refinement level")->capture_default_str();
    gen_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--out", out_path, "Output JSON path (default stdout)");

    auto* check_cmd = mesh_cmd->add_subcommand("check", "Check mesh validity and shape regularity");
    check_cmd->add_option("--mesh", mesh_path, "JSON mesh file (overrides --family/--level)");
    check_cmd->add_option("path", mesh_path, "JSON mesh file, same as --mesh");
    check_cmd->add_option("--family", family, "Generated family")->capture_default_str();
    check_cmd->add_option("--level", level, "Refinement level")->capture_default_str();
    check_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    check_cmd->add_option("--rho1", rho1, "Star-shapedness threshold in (0,1)")->capture_default_str();
    check_cmd->add_option("--rho2", rho2, "Vertex distance threshold in (0,1)")->capture_default_str();

    // ---- solve ----
    auto* solve_cmd = app.add_subcommand("solve", "Solve one manufactured problem and print errors");
    CommonOptions solve_opts;
    std::string case_id = "test1", dump_matrix, condition = "none";
    int k = 1;
    bool condensed = false;
    Eigen::Index dense_limit = default_dense_limit;
    solve_cmd->add_option("--case", case_id, "test1, test2 or patch")->capture_default_str();
    solve_cmd->add_option("--family", family, "Mesh family")->capture_default_str();
    solve_cmd->add_option("--level", level, "Refinement level")->capture_default_str();
    solve_cmd->add_option("--mesh", mesh_path, "JSON mesh file instead of a generated family");
    solve_cmd->add_option("--k", k, "Polynomial degree (>= 1)")->capture_default_str();
    solve_cmd->add_flag("--condensed", condensed, "Eliminate the bubbles before solving");
    solve_cmd->add_option("--dump-matrix", dump_matrix, "Write the assembled matrix in Matrix Market format");
    solve_cmd->add_option("--condition", condition, "Condition number: none, dense or estimate")->capture_default_str();
    solve_cmd->add_option("--dense-limit", dense_limit, "Largest dimension for dense condition numbers")->capture_default_str();
    add_common(solve_cmd, solve_opts);

    // ---- convergence ----
    auto* conv_cmd = app.add_subcommand("convergence", "Run a convergence study and write CSV");
    CommonOptions conv_opts;
    std::string cases = "test1", families = "hexagonal", levels = "1..4", k_list = "1";
    bool timing = false;
    conv_cmd->add_option("--cases", cases, "Comma-separated cases (test1, test2, patch)")->capture_default_str();
    conv_cmd->add_option("--families", families, "Comma-separated mesh families")->capture_default_str();
    conv_cmd->add_option("--levels", levels, "Levels, e.g. 1..4 or 1,2,3")->capture_default_str();
    conv_cmd->add_option("--k", k_list, "Degrees, e.g. 1,2")->capture_default_str();
    conv_cmd->add_option("--out", out_path, "Output CSV (default stdout); with several cases one file per case");
    conv_cmd->add_flag("--timing", timing, "Record wall time in the seconds column (otherwise 0)");
    conv_cmd->add_flag("--condensed", condensed, "Eliminate the bubbles before solving");
    add_common(conv_cmd, conv_opts);

    // ---- alpha-sweep ----
    auto* sweep_cmd = app.add_subcommand("alpha-sweep", "Condition number against the pressure stabilization weight");
    CommonOptions sweep_opts;
    std::string sweep_k = "1..4", bases = "ortho", alphas, method = "dense";
    sweep_cmd->add_option("--family", family, "Mesh family")->capture_default_str();
    sweep_cmd->add_option("--level", level, "Refinement level")->capture_default_str();
    sweep_cmd->add_option("--k", sweep_k, "Degrees, e.g. 1..4")->capture_default_str();
    sweep_cmd->add_option("--basis", bases, "Comma-separated bases (ortho, monomial)")->capture_default_str();
    sweep_cmd->add_option("--alphas", alphas, "Comma-separated alpha values (default 1e-15 .. 1e3 grid)");
    sweep_cmd->add_option("--method", method, "dense or estimate")->capture_default_str();
    sweep_cmd->add_option("--dense-limit", dense_limit, "Largest dimension for dense condition numbers")->capture_default_str();
    sweep_cmd->add_option("--out", out_path, "Output CSV (default stdout)");
    add_common(sweep_cmd, sweep_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*gen_cmd) {
            const MeshFamily fam = family_or_usage(family);
            check_level(fam, level);
            const PolygonalMesh mesh = generate_mesh(fam, level, seed);
            with_output(out_path, [&](std::ostream& os) { os << mesh_to_json(mesh); });
            std::cerr << to_string(fam) << " level " << level << ": " << mesh.num_vertices() << " vertices, "
                      << mesh.num_edges() << " edges, " << mesh.num_cells() << " cells\n";
            return 0;
        }
        if (*check_cmd) {
            if (!(rho1 > 0 && rho1 < 1) || !(rho2 > 0 && rho2 < 1)) throw UsageError("rho1 and rho2 must lie in (0,1)");
            PolygonalMesh mesh;
            if (!mesh_path.empty())
                mesh = import_mesh(mesh_path);
            else {
                const MeshFamily fam = family_or_usage(family);
                check_level(fam, level);
                mesh = generate_mesh(fam, level, seed);
            }
            const GeometryReport rep = validate_geometry(mesh, rho1, rho2);
            print_report(std::cout, rep, mesh);
            if (!rep.ok()) {
                std::cerr << "mesh check: " << rep.flagged.size() << " cell(s) violate the shape thresholds\n";
                return 1;
            }
            return 0;
        }
        if (*solve_cmd) {
            const BasisKind basis = basis_or_usage(solve_opts.basis);
            const StabilizationConfig stab = solve_opts.stabilization();
            if (k < 1) throw UsageError("--k must be >= 1");
            if (condition != "none" && condition != "dense" && condition != "estimate")
                throw UsageError("--condition must be none, dense or estimate");
            ManufacturedCase mc;
            try {
                mc = manufactured(case_id, k);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            PolygonalMesh mesh;
            std::string mesh_name;
            if (!mesh_path.empty()) {
                mesh = import_mesh(mesh_path);
                mesh_name = mesh_path;
            } else {
                const MeshFamily fam = family_or_usage(family);
                check_level(fam, level);
                mesh = generate_mesh(fam, level, solve_opts.seed);
                mesh_name = to_string(fam) + " level " + std::to_string(level);
            }
            const AssemblyConfig cfg{k, basis, stab};
            const GlobalSystem sys = assemble(mesh, cfg, mc.forcing, mc.boundary);
            const GlobalSystem solved_sys = condensed ? condense(sys) : sys;
            if (!dump_matrix.empty()) write_matrix_market(solved_sys.matrix, dump_matrix);
            const Solution sol = solve(solved_sys);
            const ErrorReport err = compute_errors(sys, sol, mc);

            std::cout << "case " << mc.id << "\nmesh " << mesh_name << "\nk " << k << "\nbasis " << to_string(basis)
                      << "\nalpha " << format_double(stab.alpha) << "\nbeta_sharp " << format_double(stab.beta_sharp)
                      << "\npressure_scaling " << to_string(stab.pressure_scaling) << "\ncondensed "
                      << (condensed ? "yes" : "no") << "\nh " << format_double(mesh.h) << "\nvelocity_dofs "
                      << sys.dofs.velocity_count() << "\nbubble_dofs " << sys.dofs.bubble_count() << "\npressure_dofs "
                      << sys.dofs.pressure_count() << "\nsystem_size " << solved_sys.size() << "\nerr0_u "
                      << format_double(err.err0_u) << (err.absolute_u ? " (absolute)" : "") << "\nerr1_u "
                      << format_double(err.err1_u) << (err.absolute_grad_u ? " (absolute)" : "") << "\nerr0_p "
                      << format_double(err.err0_p) << (err.absolute_p ? " (absolute)" : "") << "\nrelative_residual "
                      << format_double(sol.diagnostics.relative_residual) << "\nrefinement_steps "
                      << sol.diagnostics.refinement_steps << "\npressure_mean " << format_double(sol.pressure_mean) << '\n';
            if (case_id.starts_with("patch")) {
                const InterpolatedDofs ex = interpolate_solution(sys, mc);
                std::cout << "velocity_dof_error " << format_double((sol.velocity - ex.velocity).lpNorm<Eigen::Infinity>())
                          << "\npressure_dof_error " << format_double((sol.pressure - ex.pressure).lpNorm<Eigen::Infinity>())
                          << "\nbubble_dof_max " << format_double(sol.bubbles.lpNorm<Eigen::Infinity>()) << '\n';
            }
            if (condition != "none") {
                const double kappa = condition_number(sys, condition == "dense" ? ConditionMethod::dense_svd : ConditionMethod::norm_estimate,
                                                      dense_limit);
                std::cout << "condition " << format_double(kappa) << '\n';
            }
            for (const auto& w : sol.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
            return 0;
        }
        if (*conv_cmd) {
            ConvergenceStudy study;
            study.cases = split_list(cases);
            for (const auto& c : study.cases) {
                try {
                    (void)manufactured(c, 1);
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
            study.families = parse_enum_list<MeshFamily>(families, parse_family);
            study.levels = parse_int_list(levels);
            study.k_list = parse_int_list(k_list);
            for (int kk : study.k_list)
                if (kk < 1) throw UsageError("--k values must be >= 1");
            for (MeshFamily fam : study.families)
                for (int l : study.levels) check_level(fam, l);
            study.basis = basis_or_usage(conv_opts.basis);
            study.stabilization = conv_opts.stabilization();
            study.seed = conv_opts.seed;
            study.condensed = condensed;
            if (study.cases.size() > 1 && (out_path.empty() || out_path == "-"))
                throw UsageError("--out is required with several --cases (one CSV per case is written)");

            int failures = 0;
            for (const auto& c : study.cases) {
                ConvergenceStudy one = study;
                one.cases = {c};
                const auto records = run_convergence(one, [](const ConvergenceRecord& r) {
                    std::cerr << r.case_id << ' ' << to_string(r.family) << " level " << r.level << " k " << r.k;
                    if (r.ok())
                        std::cerr << ": err0_u " << format_double(r.errors.err0_u) << '\n';
                    else
                        std::cerr << ": FAILED: " << r.failure << '\n';
                    for (const auto& w : r.warnings) std::cerr << "  warning: " << w << '\n';
                });
                for (const auto& r : records) failures += r.ok() ? 0 : 1;
                const std::string path = study.cases.size() > 1 ? case_output_path(out_path, c) : out_path;
                with_output(path, [&](std::ostream& os) { write_convergence_csv(os, records, timing); });
            }
            if (failures > 0) {
                std::cerr << failures << " run(s) failed\n";
                return 1;
            }
            return 0;
        }
        if (*sweep_cmd) {
            const MeshFamily fam = family_or_usage(family);
            check_level(fam, level);
            const std::vector<int> ks = parse_int_list(sweep_k);
            for (int kk : ks)
                if (kk < 1) throw UsageError("--k values must be >= 1");
            const auto kinds = parse_enum_list<BasisKind>(bases, parse_basis_kind);
            const std::vector<double> grid = alphas.empty() ? default_alpha_grid() : parse_double_list(alphas);
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (!(grid[i] > 0) || (i > 0 && !(grid[i] > grid[i - 1])))
                    throw UsageError("--alphas must be positive and strictly ascending");
            if (method != "dense" && method != "estimate") throw UsageError("--method must be dense or estimate");
            const StabilizationConfig base = sweep_opts.stabilization();
            const PolygonalMesh mesh = generate_mesh(fam, level, sweep_opts.seed);
            const auto records = run_alpha_sweep(mesh, ks, kinds, grid,
                                                 method == "dense" ? ConditionMethod::dense_svd : ConditionMethod::norm_estimate,
                                                 dense_limit, base, [](const AlphaRecord& r) {
                                                     std::cerr << to_string(r.basis) << " k " << r.k << " alpha "
                                                               << csv_number(r.alpha) << ": "
                                                               << (r.condition ? csv_number(*r.condition) : "missing (" + r.failure + ")")
                                                               << '\n';
                                                 });
            with_output(out_path, [&](std::ostream& os) { write_alpha_csv(os, records); });
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
