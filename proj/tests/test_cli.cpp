#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"

#include "psdn/image.hpp"
#include "psdn/pgm_io.hpp"
#include "psdn/priors.hpp"

#ifndef PSDN_BIN
#error "PSDN_BIN must point at the CLI executable"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args)
{
    const std::string cmd = std::string(PSDN_BIN) + " " + args + " 2>&1";
    RunResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe))
        res.output.append(buf, got);
    const int status = pclose(pipe);
    REQUIRE(WIFEXITED(status));
    res.exit_code = WEXITSTATUS(status);
    return res;
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "psdn_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<double> read_doubles(const fs::path& f64)
{
    return psdn::read_f64(f64).data;
}

bool contains(const std::string& haystack, const std::string& needle)
{
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("cli: no arguments and unknown flags use exit code 1")
{
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("denoise --bogus-flag 1").exit_code == 1);
    CHECK(run_cli("frobnicate").exit_code == 1);
}

TEST_CASE("cli: add-noise writes both formats; sigma 0 is an exact copy")
{
    const fs::path dir = fresh_dir("addnoise");
    const psdn::ImageBuffer clean =
        psdn::make_test_image(psdn::TestImageKind::gradient, 6, 5);
    psdn::write_f64(dir / "in.f64", clean);

    const RunResult r = run_cli("add-noise --in " + (dir / "in.f64").string() +
                                " --out " + (dir / "noisy.pgm").string() +
                                " --sigma 0.25 --seed 11");
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "sigma"));
    CHECK(fs::exists(dir / "noisy.pgm"));
    CHECK(fs::exists(dir / "noisy.pgm.f64"));
    const auto noisy = read_doubles(dir / "noisy.pgm.f64");
    REQUIRE(noisy.size() == clean.data.size());
    CHECK(noisy != clean.data);

    const RunResult r0 = run_cli("add-noise --in " + (dir / "in.f64").string() +
                                 " --out " + (dir / "copy.pgm").string() +
                                 " --sigma 0 --seed 11");
    CHECK(r0.exit_code == 0);
    CHECK(read_doubles(dir / "copy.pgm.f64") == clean.data);

    CHECK(run_cli("add-noise --in " + (dir / "in.f64").string() + " --out " +
                  (dir / "x.pgm").string() + " --sigma -1")
              .exit_code == 1);
}

TEST_CASE("cli: denoise runs, reports, and is bitwise reproducible")
{
    const fs::path dir = fresh_dir("denoise");
    const psdn::ImageBuffer clean =
        psdn::make_test_image(psdn::TestImageKind::piecewise, 16, 16);
    psdn::write_f64(dir / "clean.f64", clean);
    psdn::NoiseSpec spec;
    spec.sigma = 0.1;
    spec.seed = 3;
    psdn::write_f64(dir / "noisy.f64", psdn::add_awgn(clean, spec));

    const std::string base = "denoise --in " + (dir / "noisy.f64").string() +
                             " --prior dct-l1 --lambda 0.08 --patch 4 --stride 2 "
                             "--sigma 0.1 --truth " +
                             (dir / "clean.f64").string();

    const RunResult r1 = run_cli(base + " --method synthesis-admm --out " +
                                 (dir / "out1.pgm").string());
    CHECK(r1.exit_code == 0);
    CHECK(contains(r1.output, "iterations"));
    CHECK(contains(r1.output, "PSNR(x_hat, truth)"));
    CHECK(contains(r1.output, "PSNR(y, truth)"));
    CHECK(fs::exists(dir / "out1.pgm"));
    CHECK(fs::exists(dir / "out1.pgm.f64"));
    CHECK(fs::exists(dir / "out1.pgm.trace"));

    const RunResult r2 = run_cli(base + " --method synthesis-admm --out " +
                                 (dir / "out2.pgm").string());
    CHECK(r2.exit_code == 0);
    CHECK(read_doubles(dir / "out1.pgm.f64") == read_doubles(dir / "out2.pgm.f64"));

    // The other two formulations run on the same instance.
    for (const std::string method : {"analysis-admm", "analysis-hqs"}) {
        const RunResult r = run_cli(base + " --method " + method + " --out " +
                                    (dir / ("out_" + method + ".pgm")).string());
        CHECK(r.exit_code == 0);
        CHECK(contains(r.output, method));
    }

    CHECK(run_cli(base + " --method downhill --out " + (dir / "z.pgm").string())
              .exit_code == 1);
    CHECK(run_cli("denoise --in " + (dir / "absent.f64").string() +
                  " --out " + (dir / "z.pgm").string() +
                  " --method synthesis-admm --prior l1 --sigma 0.1")
              .exit_code == 2);
}

TEST_CASE("cli: trace file honors --trace-out and has the standard header")
{
    const fs::path dir = fresh_dir("trace");
    const psdn::ImageBuffer clean =
        psdn::make_test_image(psdn::TestImageKind::constant, 8, 8);
    psdn::write_f64(dir / "in.f64", clean);

    const RunResult r = run_cli("denoise --in " + (dir / "in.f64").string() +
                                " --out " + (dir / "out.pgm").string() +
                                " --method analysis-admm --prior l2 --lambda 0.5 "
                                "--patch 4 --stride 4 --sigma 0.2 --trace-out " +
                                (dir / "custom.trace").string());
    CHECK(r.exit_code == 0);
    std::ifstream in(dir / "custom.trace");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "# iter objective primal_residual dual_residual");
}

TEST_CASE("cli: geometry errors exit 4, divergence exits 5")
{
    const fs::path dir = fresh_dir("errors");
    psdn::write_f64(dir / "in.f64",
                    psdn::make_test_image(psdn::TestImageKind::gradient, 8, 8));

    // Stride 3 with patch 2 leaves uncovered pixel columns under clip.
    CHECK(run_cli("denoise --in " + (dir / "in.f64").string() + " --out " +
                  (dir / "o.pgm").string() +
                  " --method synthesis-admm --prior l1 --patch 2 --stride 3 "
                  "--sigma 0.1")
              .exit_code == 4);

    // sigma^2 rho overflows to infinity: the first iterate is non-finite.
    CHECK(run_cli("denoise --in " + (dir / "in.f64").string() + " --out " +
                  (dir / "o.pgm").string() +
                  " --method synthesis-admm --prior l2 --sigma 1e160 --rho 1 "
                  "--max-iter 5")
              .exit_code == 5);
}

TEST_CASE("cli: config file supplies values, flags win, bad configs exit")
{
    const fs::path dir = fresh_dir("config");
    const psdn::ImageBuffer clean =
        psdn::make_test_image(psdn::TestImageKind::piecewise, 8, 8);
    psdn::write_f64(dir / "in.f64", clean);

    {
        std::ofstream cfg(dir / "run.json");
        cfg << "{\n"
            << "  \"in\": \"" << (dir / "in.f64").string() << "\",\n"
            << "  \"out\": \"" << (dir / "from_config.pgm").string() << "\",\n"
            << "  \"method\": \"analysis-admm\",\n"
            << "  \"prior\": \"l2\",\n"
            << "  \"lambda\": 0.5,\n"
            << "  \"patch\": 4,\n"
            << "  \"stride\": 2,\n"
            << "  \"sigma\": 0.3\n"
            << "}\n";
    }
    const RunResult r = run_cli("denoise --config " + (dir / "run.json").string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "from_config.pgm.f64"));

    // An explicit flag overrides the config value for the same key.
    const RunResult r2 = run_cli("denoise --config " + (dir / "run.json").string() +
                                 " --out " + (dir / "flag_wins.pgm").string());
    CHECK(r2.exit_code == 0);
    CHECK(fs::exists(dir / "flag_wins.pgm.f64"));
    CHECK(read_doubles(dir / "flag_wins.pgm.f64") ==
          read_doubles(dir / "from_config.pgm.f64"));

    {
        std::ofstream cfg(dir / "unknown.json");
        cfg << "{ \"in\": \"x\", \"wavelength\": 3 }\n";
    }
    CHECK(run_cli("denoise --config " + (dir / "unknown.json").string()).exit_code == 1);

    {
        std::ofstream cfg(dir / "broken.json");
        cfg << "{ not json";
    }
    CHECK(run_cli("denoise --config " + (dir / "broken.json").string()).exit_code == 2);
    CHECK(run_cli("denoise --config " + (dir / "missing.json").string()).exit_code == 2);
}

TEST_CASE("cli: sample-prior writes images and a manifest; caps respected")
{
    const fs::path dir = fresh_dir("sample");
    const RunResult r = run_cli("sample-prior --out " + (dir / "draw.pgm").string() +
                                " --prior l2 --lambda 0.5 --height 8 --width 8 "
                                "--patch 4 --stride 4 --seed 9 --count 3");
    CHECK(r.exit_code == 0);
    for (const char* stem : {"draw_0000", "draw_0001", "draw_0002"}) {
        CHECK(fs::exists(dir / (std::string(stem) + ".pgm")));
        CHECK(fs::exists(dir / (std::string(stem) + ".pgm.f64")));
    }
    const fs::path manifest = dir / "draw_manifest.json";
    REQUIRE(fs::exists(manifest));
    std::ifstream in(manifest);
    std::string body((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(contains(body, "\"seed\""));
    CHECK(contains(body, "\"count\""));
    CHECK(contains(body, "draw_0002.pgm"));

    CHECK(run_cli("sample-prior --out " + (dir / "z.pgm").string() +
                  " --prior dct-l1 --height 8 --width 8 --patch 4 --stride 4")
              .exit_code == 3);
    CHECK(run_cli("sample-prior --out " + (dir / "z.pgm").string() +
                  " --prior l2 --height 8 --width 8 --patch 4 --stride 4 --count 0")
              .exit_code == 1);
}

TEST_CASE("cli: gmm prior via --gmm-path and inline gmm:<path>")
{
    const fs::path dir = fresh_dir("gmm");
    std::vector<double> w = {0.4, 0.6};
    std::vector<double> m = {0.2, 0.2, 0.2, 0.2, 0.7, 0.7, 0.7, 0.7};
    std::vector<double> c(32, 0.0);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 4; ++i)
            c[k * 16 + i * 4 + i] = 0.02;
    const psdn::GmmPrior gmm(4, w, m, c);
    psdn::save_gmm(dir / "model.gmm", gmm);

    psdn::write_f64(dir / "in.f64",
                    psdn::make_test_image(psdn::TestImageKind::piecewise, 8, 8));
    const std::string common = "denoise --in " + (dir / "in.f64").string() +
                               " --method synthesis-admm --patch 2 --stride 2 "
                               "--sigma 0.2 --max-iter 30";

    const RunResult r1 = run_cli(common + " --prior gmm --gmm-path " +
                                 (dir / "model.gmm").string() + " --out " +
                                 (dir / "o1.pgm").string());
    CHECK(r1.exit_code == 0);
    CHECK(contains(r1.output, "not log-concave"));

    const RunResult r2 = run_cli(common + " --prior gmm:" +
                                 (dir / "model.gmm").string() + " --out " +
                                 (dir / "o2.pgm").string());
    CHECK(r2.exit_code == 0);
    CHECK(read_doubles(dir / "o1.pgm.f64") == read_doubles(dir / "o2.pgm.f64"));

    CHECK(run_cli(common + " --prior gmm --out " + (dir / "o3.pgm").string())
              .exit_code == 1);

    // sample-prior also accepts the model and stays deterministic.
    const std::string samp = "sample-prior --prior gmm --gmm-path " +
                             (dir / "model.gmm").string() +
                             " --height 4 --width 4 --patch 2 --stride 2 --seed 5 "
                             "--count 1 --out ";
    CHECK(run_cli(samp + (dir / "s1.pgm").string()).exit_code == 0);
    CHECK(run_cli(samp + (dir / "s2.pgm").string()).exit_code == 0);
    CHECK(read_doubles(dir / "s1_0000.pgm.f64") ==
          read_doubles(dir / "s2_0000.pgm.f64"));
}

TEST_CASE("cli: report-operators prints the geometry summary")
{
    const RunResult r = run_cli("report-operators --height 1 --width 4 --patch-h 1 "
                                "--patch-w 2 --stride 1 --boundary periodic");
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "M (patches)        = 4"));
    CHECK(contains(r.output, "n (patch length)   = 2"));
    CHECK(contains(r.output, "N (pixels)         = 4"));
    CHECK(contains(r.output, "overlapping        = yes"));
    CHECK(contains(r.output, "2 -> 4"));
    CHECK(contains(r.output, "qqt_diag: min = 0.5, max = 0.5"));

    CHECK(run_cli("report-operators --height 4 --width 4 --patch 2 --stride 2")
              .exit_code == 0);
    CHECK(run_cli("report-operators --height 4 --width 4 --patch 5 --stride 1")
              .exit_code == 4);
}
