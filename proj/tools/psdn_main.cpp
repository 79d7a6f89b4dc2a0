// psdn — patch-based image denoising CLI.
//
// Subcommands:
//   add-noise         add white Gaussian noise to an image
//   denoise           run one of the patch-domain solvers
//   sample-prior      draw images from a patch prior via averaging synthesis
//   report-operators  print patch-grid operator structure for a geometry
//
// Exit codes: 0 success, 1 usage/validation, 2 I/O, 3 capability,
// 4 geometry (uncovered pixels), 5 solver divergence.
//
// Every flag may also be supplied through --config <file.json>, whose keys
// mirror the long flag names without the leading dashes. Values given on the
// command line win over config-file values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "psdn/errors.hpp"
#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"
#include "psdn/patch_ops.hpp"
#include "psdn/pgm_io.hpp"
#include "psdn/priors.hpp"
#include "psdn/sampler.hpp"
#include "psdn/solvers.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config-file plumbing: every bound option remembers how to read its value
// from JSON, so a config file can stand in for flags the user did not pass.
// ---------------------------------------------------------------------------

class ConfigBinder {
public:
    template <typename T>
    CLI::Option* bind(CLI::App& app, const std::string& flag, T& target,
                      const std::string& help) {
        CLI::Option* opt = app.add_option(flag, target, help);
        Entry entry;
        entry.key = key_of(flag);
        entry.opt = opt;
        entry.set = [&target](const json& value) { target = value.get<T>(); };
        entries_.push_back(std::move(entry));
        return opt;
    }

    /// Merge values from a JSON object file. Flags given on the command line
    /// win; unknown keys are rejected so typos never pass silently.
    void apply_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw psdn::io_error("cannot open config file: " + path);
        }
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw psdn::io_error("malformed JSON in config file " + path + ": " +
                                 e.what());
        }
        if (!doc.is_object()) {
            throw psdn::io_error("config file " + path +
                                 " must hold a JSON object");
        }
        for (const auto& [key, value] : doc.items()) {
            Entry* entry = find(key);
            if (entry == nullptr) {
                throw std::invalid_argument("unknown config key: " + key);
            }
            if (entry->opt->count() > 0) {
                continue; // command line wins
            }
            try {
                entry->set(value);
            } catch (const json::exception& e) {
                throw std::invalid_argument("bad value for config key " + key +
                                            ": " + e.what());
            }
            entry->from_config = true;
        }
    }

    /// Post-parse required check (CLI11's ->required() cannot be used for
    /// options a config file may satisfy).
    void require(std::initializer_list<std::string> keys) const {
        for (const std::string& key : keys) {
            const Entry* entry = nullptr;
            for (const Entry& e : entries_) {
                if (e.key == key) {
                    entry = &e;
                    break;
                }
            }
            if (entry == nullptr || (entry->opt->count() == 0 && !entry->from_config)) {
                throw std::invalid_argument("missing required option --" + key);
            }
        }
    }

    bool provided(const std::string& key) const {
        for (const Entry& e : entries_) {
            if (e.key == key) {
                return e.opt->count() > 0 || e.from_config;
            }
        }
        return false;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* opt = nullptr;
        std::function<void(const json&)> set;
        bool from_config = false;
    };

    static std::string key_of(const std::string& flag) {
        std::string::size_type pos = flag.find_first_not_of('-');
        return flag.substr(pos == std::string::npos ? flag.size() : pos);
    }

    Entry* find(const std::string& key) {
        for (Entry& e : entries_) {
            if (e.key == key) {
                return &e;
            }
        }
        return nullptr;
    }

    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Shared flag groups.
// ---------------------------------------------------------------------------

struct GridFlags {
    int patch = 8;
    int patch_h = 0; // 0: use patch
    int patch_w = 0;
    int stride = 1;
    int stride_y = 0; // 0: use stride
    int stride_x = 0;
    std::string boundary = "clip";
};

void bind_grid_flags(ConfigBinder& binder, CLI::App& app, GridFlags& g) {
    binder.bind(app, "--patch", g.patch, "square patch side (default 8)");
    binder.bind(app, "--patch-h", g.patch_h, "patch height (overrides --patch)");
    binder.bind(app, "--patch-w", g.patch_w, "patch width (overrides --patch)");
    binder.bind(app, "--stride", g.stride, "patch lattice stride (default 1)");
    binder.bind(app, "--stride-y", g.stride_y, "vertical stride (overrides --stride)");
    binder.bind(app, "--stride-x", g.stride_x, "horizontal stride (overrides --stride)");
    binder.bind(app, "--boundary", g.boundary, "patch lattice boundary: clip | periodic");
}

psdn::Boundary parse_boundary(const std::string& name) {
    if (name == "clip") {
        return psdn::Boundary::clip;
    }
    if (name == "periodic") {
        return psdn::Boundary::periodic;
    }
    throw std::invalid_argument("unknown boundary '" + name +
                                "' (expected clip or periodic)");
}

psdn::PatchGrid make_grid(const GridFlags& g, int height, int width) {
    const int ph = g.patch_h > 0 ? g.patch_h : g.patch;
    const int pw = g.patch_w > 0 ? g.patch_w : g.patch;
    const int sy = g.stride_y > 0 ? g.stride_y : g.stride;
    const int sx = g.stride_x > 0 ? g.stride_x : g.stride;
    return psdn::plan_grid(height, width, ph, pw, sy, sx, parse_boundary(g.boundary));
}

int resolved_patch_h(const GridFlags& g) { return g.patch_h > 0 ? g.patch_h : g.patch; }
int resolved_patch_w(const GridFlags& g) { return g.patch_w > 0 ? g.patch_w : g.patch; }

// ---------------------------------------------------------------------------
// I/O helpers.
// ---------------------------------------------------------------------------

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

psdn::ImageBuffer read_image_any(const std::string& path) {
    if (has_suffix(path, ".f64")) {
        return psdn::read_f64(path);
    }
    return psdn::read_pgm(path);
}

/// Writes the displayable PGM plus a lossless float64 dump at <path>.f64.
void write_image_outputs(const std::string& path, const psdn::ImageBuffer& img) {
    psdn::write_pgm(path, img, 255);
    psdn::write_f64(path + ".f64", img);
}

std::string trim_pgm_suffix(const std::string& path) {
    if (has_suffix(path, ".pgm")) {
        return path.substr(0, path.size() - 4);
    }
    return path;
}

// ---------------------------------------------------------------------------
// add-noise
// ---------------------------------------------------------------------------

struct AddNoiseParams {
    std::string in;
    std::string out;
    std::string config;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    ConfigBinder binder;
};

void run_add_noise(AddNoiseParams& p) {
    if (!p.config.empty()) {
        p.binder.apply_file(p.config);
    }
    p.binder.require({"in", "out", "sigma"});
    if (p.sigma < 0.0) {
        throw std::invalid_argument("--sigma must be >= 0");
    }

    const psdn::ImageBuffer x = read_image_any(p.in);
    psdn::NoiseSpec spec;
    spec.sigma = p.sigma;
    spec.seed = p.seed;
    const psdn::ImageBuffer y = psdn::add_awgn(x, spec);
    write_image_outputs(p.out, y);

    std::printf("add-noise: %dx%d image, sigma = %.17g, seed = %llu\n", x.height,
                x.width, p.sigma, static_cast<unsigned long long>(p.seed));
    std::printf("wrote %s and %s.f64\n", p.out.c_str(), p.out.c_str());
}

// ---------------------------------------------------------------------------
// denoise
// ---------------------------------------------------------------------------

struct DenoiseParams {
    std::string in;
    std::string out;
    std::string truth;
    std::string method;
    std::string prior = "l1";
    std::string gmm_path;
    std::string trace_out;
    std::string config;
    GridFlags grid;
    double lambda = 0.1;
    double sigma = 0.0;
    double rho = 0.0;      // 0: default 1/sigma^2
    int max_iter = 300;
    double tol_abs = 1e-6;
    double tol_rel = 1e-4;
    double beta_init = 0.0; // 0: default 1/sigma^2
    double beta_growth = 4.0;
    int beta_stages = 6;
    ConfigBinder binder;
};

void run_denoise(DenoiseParams& p) {
    if (!p.config.empty()) {
        p.binder.apply_file(p.config);
    }
    p.binder.require({"in", "out", "method", "prior", "sigma"});

    const psdn::ImageBuffer y = read_image_any(p.in);
    const psdn::PatchGrid grid = make_grid(p.grid, y.height, y.width);
    const std::unique_ptr<psdn::PatchPrior> prior = psdn::make_prior(
        p.prior, resolved_patch_h(p.grid), resolved_patch_w(p.grid), p.lambda,
        p.gmm_path);

    const auto t0 = std::chrono::steady_clock::now();
    psdn::SolverResult result;
    if (p.method == "synthesis-admm" || p.method == "analysis-admm") {
        psdn::AdmmConfig cfg = psdn::AdmmConfig::defaults(p.sigma);
        if (p.rho > 0.0) {
            cfg.rho = p.rho;
        } else if (p.binder.provided("rho")) {
            throw std::invalid_argument("--rho must be > 0");
        }
        cfg.max_iter = p.max_iter;
        cfg.tol_abs = p.tol_abs;
        cfg.tol_rel = p.tol_rel;
        result = p.method == "synthesis-admm"
                     ? psdn::denoise_synthesis_admm(y, grid, *prior, cfg)
                     : psdn::denoise_analysis_admm(y, grid, *prior, cfg);
    } else if (p.method == "analysis-hqs") {
        psdn::HqsConfig cfg = psdn::HqsConfig::defaults(p.sigma);
        if (p.beta_init > 0.0) {
            cfg.beta_init = p.beta_init;
        } else if (p.binder.provided("beta-init")) {
            throw std::invalid_argument("--beta-init must be > 0");
        }
        cfg.beta_growth = p.beta_growth;
        cfg.betas_count = p.beta_stages;
        result = psdn::denoise_analysis_hqs(y, grid, *prior, cfg);
    } else {
        throw std::invalid_argument(
            "unknown method '" + p.method +
            "' (expected synthesis-admm, analysis-hqs, or analysis-admm)");
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double wall = std::chrono::duration<double>(t1 - t0).count();

    write_image_outputs(p.out, result.x_hat);
    const std::string trace_path =
        p.trace_out.empty() ? p.out + ".trace" : p.trace_out;
    psdn::write_trace(trace_path, result);

    const double objective =
        result.objective_trace.empty() ? std::nan("") : result.objective_trace.back();
    std::printf("denoise: method = %s, prior = %s, %dx%d image, M = %lld patches\n",
                p.method.c_str(), p.prior.c_str(), y.height, y.width,
                static_cast<long long>(grid.num_patches));
    std::printf("iterations = %d, converged = %s, final objective = %.17g\n",
                result.iterations, result.converged ? "yes" : "no", objective);
    if (result.nonconvex_prior) {
        std::printf("note: prior is not log-concave; the run certifies a fixed "
                    "point, not a global optimum\n");
    }
    std::printf("wall time = %.3f s\n", wall);
    if (!p.truth.empty()) {
        const psdn::ImageBuffer truth = read_image_any(p.truth);
        std::printf("PSNR(x_hat, truth) = %.4f dB\n", psdn::psnr(result.x_hat, truth));
        std::printf("PSNR(y, truth)     = %.4f dB\n", psdn::psnr(y, truth));
    }
    std::printf("wrote %s, %s.f64, %s\n", p.out.c_str(), p.out.c_str(),
                trace_path.c_str());
}

// ---------------------------------------------------------------------------
// sample-prior
// ---------------------------------------------------------------------------

struct SamplePriorParams {
    std::string out;
    std::string prior = "l1";
    std::string gmm_path;
    std::string config;
    GridFlags grid;
    double lambda = 0.1;
    int height = 0;
    int width = 0;
    std::uint64_t seed = 0;
    int count = 1;
    ConfigBinder binder;
};

void run_sample_prior(SamplePriorParams& p) {
    if (!p.config.empty()) {
        p.binder.apply_file(p.config);
    }
    p.binder.require({"out", "prior", "height", "width"});
    if (p.count <= 0) {
        throw std::invalid_argument("--count must be >= 1");
    }

    const psdn::PatchGrid grid = make_grid(p.grid, p.height, p.width);
    const std::unique_ptr<psdn::PatchPrior> prior = psdn::make_prior(
        p.prior, resolved_patch_h(p.grid), resolved_patch_w(p.grid), p.lambda,
        p.gmm_path);

    psdn::SampleJob job;
    job.grid = &grid;
    job.prior = prior.get();
    job.seed = p.seed;
    job.count = p.count;
    const std::vector<psdn::ImageBuffer> images = psdn::sample_prior_image(job);

    const std::string stem = trim_pgm_suffix(p.out);
    json manifest;
    manifest["prior"] = p.prior;
    manifest["lambda"] = p.lambda;
    if (!p.gmm_path.empty()) {
        manifest["gmm_path"] = p.gmm_path;
    }
    manifest["seed"] = p.seed;
    manifest["count"] = p.count;
    manifest["grid"] = {
        {"height", p.height},       {"width", p.width},
        {"patch_h", grid.patch_height}, {"patch_w", grid.patch_width},
        {"stride_y", grid.stride_y},    {"stride_x", grid.stride_x},
        {"boundary", p.grid.boundary},  {"num_patches", grid.num_patches},
    };
    json files = json::array();
    for (std::size_t k = 0; k < images.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "_%04zu.pgm", k);
        const std::string path = stem + name;
        write_image_outputs(path, images[k]);
        files.push_back(path);
    }
    manifest["files"] = files;

    const std::string manifest_path = stem + "_manifest.json";
    psdn::atomic_write(manifest_path, [&](std::ostream& out) {
        out << manifest.dump(2) << "\n";
    });

    std::printf("sample-prior: wrote %d image(s) and %s\n", p.count,
                manifest_path.c_str());
}

// ---------------------------------------------------------------------------
// report-operators
// ---------------------------------------------------------------------------

struct ReportParams {
    std::string config;
    GridFlags grid;
    int height = 0;
    int width = 0;
    ConfigBinder binder;
};

void run_report_operators(ReportParams& p) {
    if (!p.config.empty()) {
        p.binder.apply_file(p.config);
    }
    p.binder.require({"height", "width"});

    const psdn::PatchGrid grid = make_grid(p.grid, p.height, p.width);
    const std::vector<double> q = psdn::qqt_diag(grid);
    const auto [qmin, qmax] = std::minmax_element(q.begin(), q.end());

    std::map<std::int32_t, std::int64_t> histogram;
    for (std::int32_t c : grid.counts) {
        ++histogram[c];
    }

    std::printf("geometry: %dx%d image, %dx%d patches, stride %dx%d, %s boundary\n",
                grid.image_height, grid.image_width, grid.patch_height,
                grid.patch_width, grid.stride_y, grid.stride_x,
                grid.boundary == psdn::Boundary::clip ? "clip" : "periodic");
    std::printf("M (patches)        = %lld\n",
                static_cast<long long>(grid.num_patches));
    std::printf("n (patch length)   = %d\n", grid.patch_dim());
    std::printf("N (pixels)         = %lld\n",
                static_cast<long long>(grid.num_pixels()));
    std::printf("overlapping        = %s\n", grid.overlapping() ? "yes" : "no");
    std::printf("patch count histogram (count -> pixels):\n");
    for (const auto& [count, pixels] : histogram) {
        std::printf("  %d -> %lld\n", count, static_cast<long long>(pixels));
    }
    std::printf("qqt_diag: min = %.17g, max = %.17g\n", *qmin, *qmax);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"patch-based image denoising: analysis and synthesis formulations"};
    app.require_subcommand(1);

    auto add_noise = std::make_shared<AddNoiseParams>();
    {
        CLI::App* sub = app.add_subcommand("add-noise",
                                           "add white Gaussian noise to an image");
        add_noise->binder.bind(*sub, "--in", add_noise->in, "input image (PGM or .f64 dump)");
        add_noise->binder.bind(*sub, "--out", add_noise->out, "output PGM path");
        add_noise->binder.bind(*sub, "--sigma", add_noise->sigma, "noise standard deviation");
        add_noise->binder.bind(*sub, "--seed", add_noise->seed, "RNG seed (default 0)");
        sub->add_option("--config", add_noise->config, "JSON config file; flags win");
        sub->callback([add_noise] { run_add_noise(*add_noise); });
    }

    auto denoise = std::make_shared<DenoiseParams>();
    {
        CLI::App* sub = app.add_subcommand("denoise", "denoise an image with a patch prior");
        denoise->binder.bind(*sub, "--in", denoise->in, "noisy input image (PGM or .f64 dump)");
        denoise->binder.bind(*sub, "--out", denoise->out, "output PGM path");
        denoise->binder.bind(*sub, "--truth", denoise->truth, "clean image for PSNR report");
        denoise->binder.bind(*sub, "--method", denoise->method,
                             "synthesis-admm | analysis-hqs | analysis-admm");
        denoise->binder.bind(*sub, "--prior", denoise->prior,
                             "l1 | l2 | dct-l1 | dct-l2 | gmm | gmm:<path>");
        denoise->binder.bind(*sub, "--lambda", denoise->lambda, "prior weight (default 0.1)");
        denoise->binder.bind(*sub, "--gmm-path", denoise->gmm_path, "GMM model file for --prior gmm");
        bind_grid_flags(denoise->binder, *sub, denoise->grid);
        denoise->binder.bind(*sub, "--sigma", denoise->sigma, "noise standard deviation");
        denoise->binder.bind(*sub, "--rho", denoise->rho,
                             "ADMM coupling weight (default 1/sigma^2)");
        denoise->binder.bind(*sub, "--max-iter", denoise->max_iter,
                             "ADMM iteration cap (default 300)");
        denoise->binder.bind(*sub, "--tol-abs", denoise->tol_abs,
                             "ADMM absolute tolerance (default 1e-6)");
        denoise->binder.bind(*sub, "--tol-rel", denoise->tol_rel,
                             "ADMM relative tolerance (default 1e-4)");
        denoise->binder.bind(*sub, "--beta-init", denoise->beta_init,
                             "HQS initial beta (default 1/sigma^2)");
        denoise->binder.bind(*sub, "--beta-growth", denoise->beta_growth,
                             "HQS beta growth factor (default 4)");
        denoise->binder.bind(*sub, "--beta-stages", denoise->beta_stages,
                             "HQS schedule length (default 6)");
        denoise->binder.bind(*sub, "--trace-out", denoise->trace_out,
                             "trace file path (default <out>.trace)");
        sub->add_option("--config", denoise->config, "JSON config file; flags win");
        sub->callback([denoise] { run_denoise(*denoise); });
    }

    auto sample = std::make_shared<SamplePriorParams>();
    {
        CLI::App* sub = app.add_subcommand("sample-prior",
                                           "draw images from a patch prior");
        sample->binder.bind(*sub, "--out", sample->out,
                            "output stem; files are <stem>_0000.pgm, ...");
        sample->binder.bind(*sub, "--prior", sample->prior,
                            "l1 | l2 | dct-l1 | dct-l2 | gmm | gmm:<path>");
        sample->binder.bind(*sub, "--lambda", sample->lambda, "prior weight (default 0.1)");
        sample->binder.bind(*sub, "--gmm-path", sample->gmm_path, "GMM model file for --prior gmm");
        bind_grid_flags(sample->binder, *sub, sample->grid);
        sample->binder.bind(*sub, "--height", sample->height, "sampled image height");
        sample->binder.bind(*sub, "--width", sample->width, "sampled image width");
        sample->binder.bind(*sub, "--seed", sample->seed, "RNG seed (default 0)");
        sample->binder.bind(*sub, "--count", sample->count, "number of images (default 1)");
        sub->add_option("--config", sample->config, "JSON config file; flags win");
        sub->callback([sample] { run_sample_prior(*sample); });
    }

    auto report = std::make_shared<ReportParams>();
    {
        CLI::App* sub = app.add_subcommand("report-operators",
                                           "print patch-grid operator structure");
        bind_grid_flags(report->binder, *sub, report->grid);
        report->binder.bind(*sub, "--height", report->height, "image height");
        report->binder.bind(*sub, "--width", report->width, "image width");
        sub->add_option("--config", report->config, "JSON config file; flags win");
        sub->callback([report] { run_report_operators(*report); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const psdn::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const psdn::capability_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const psdn::geometry_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const psdn::divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
