// Times the OpenMP patch-operator kernels against the single-threaded
// reference implementations and reports the largest elementwise difference
// between the two, which must be 0 (the parallel kernels fix a summation
// order).
//
// Usage: psdn_bench [height width patch stride repeats]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"
#include "psdn/patch_ops.hpp"
#include "psdn/rng.hpp"
#include "psdn/serial_ref.hpp"
#include "psdn/solvers.hpp"

namespace {

double time_best_of(int repeats, const std::function<void()>& fn) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

void report(const char* name, double serial_s, double parallel_s, double diff) {
    std::printf("%-20s %12.6f s %12.6f s %8.2fx   max|diff| = %g\n", name,
                serial_s, parallel_s, serial_s / parallel_s, diff);
}

} // namespace

int main(int argc, char** argv) {
    int height = 256;
    int width = 256;
    int patch = 8;
    int stride = 1;
    int repeats = 5;
    if (argc >= 3) {
        height = std::atoi(argv[1]);
        width = std::atoi(argv[2]);
    }
    if (argc >= 4) {
        patch = std::atoi(argv[3]);
    }
    if (argc >= 5) {
        stride = std::atoi(argv[4]);
    }
    if (argc >= 6) {
        repeats = std::atoi(argv[5]);
    }

    const psdn::PatchGrid grid = psdn::plan_grid(height, width, patch, patch,
                                                 stride, stride,
                                                 psdn::Boundary::clip);
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; the parallel kernels run single threaded\n");
#endif
    std::printf("grid: %dx%d image, %dx%d patches, stride %d, M = %lld, "
                "stack length = %lld doubles\n\n",
                height, width, patch, patch, stride,
                static_cast<long long>(grid.num_patches),
                static_cast<long long>(grid.stack_len()));
    std::printf("%-20s %14s %14s %9s\n", "kernel", "serial", "parallel",
                "speedup");

    psdn::Rng rng(0xb5eed);
    psdn::ImageBuffer img(height, width);
    for (double& v : img.data) {
        v = rng.u01();
    }
    psdn::PatchStack stack = psdn::zeros_like(grid);
    for (double& v : stack.data) {
        v = rng.normal();
    }

    psdn::PatchStack stack_out_p = psdn::zeros_like(grid);
    psdn::PatchStack stack_out_s = psdn::zeros_like(grid);
    psdn::ImageBuffer img_out_p(height, width);
    psdn::ImageBuffer img_out_s(height, width);

    {
        const double ts = time_best_of(repeats, [&] {
            stack_out_s = psdn::serial::extract(grid, img);
        });
        const double tp = time_best_of(repeats, [&] {
            stack_out_p = psdn::extract(grid, img);
        });
        report("extract", ts, tp, max_abs_diff(stack_out_s.data, stack_out_p.data));
    }
    {
        const double ts = time_best_of(repeats, [&] {
            img_out_s = psdn::serial::synthesize(grid, stack);
        });
        const double tp = time_best_of(repeats, [&] {
            img_out_p = psdn::synthesize(grid, stack);
        });
        report("synthesize", ts, tp, max_abs_diff(img_out_s.data, img_out_p.data));
    }
    {
        const double ts = time_best_of(repeats, [&] {
            stack_out_s = psdn::serial::synthesize_adjoint(grid, img);
        });
        const double tp = time_best_of(repeats, [&] {
            stack_out_p = psdn::synthesize_adjoint(grid, img);
        });
        report("synthesize_adjoint", ts, tp,
               max_abs_diff(stack_out_s.data, stack_out_p.data));
    }
    {
        const double ts = time_best_of(repeats, [&] {
            img_out_s = psdn::serial::extract_adjoint(grid, stack);
        });
        const double tp = time_best_of(repeats, [&] {
            img_out_p = psdn::extract_adjoint(grid, stack);
        });
        report("extract_adjoint", ts, tp,
               max_abs_diff(img_out_s.data, img_out_p.data));
    }
    {
        const double ts = time_best_of(repeats, [&] {
            stack_out_s = psdn::serial::project_range(grid, stack);
        });
        const double tp = time_best_of(repeats, [&] {
            stack_out_p = psdn::project_range(grid, stack);
        });
        report("project_range", ts, tp,
               max_abs_diff(stack_out_s.data, stack_out_p.data));
    }
    {
        psdn::PatchStack u = psdn::zeros_like(grid);
        psdn::PatchStack d = psdn::zeros_like(grid);
        for (double& v : u.data) {
            v = rng.normal();
        }
        for (double& v : d.data) {
            v = 0.1 * rng.normal();
        }
        const double sigma = 0.1;
        const double rho = 1.0 / (sigma * sigma);
        const double ts = time_best_of(repeats, [&] {
            stack_out_s = psdn::serial::synthesis_z_update(grid, img, u, d, sigma, rho);
        });
        const double tp = time_best_of(repeats, [&] {
            stack_out_p = psdn::synthesis_z_update(grid, img, u, d, sigma, rho);
        });
        report("synthesis_z_update", ts, tp,
               max_abs_diff(stack_out_s.data, stack_out_p.data));
    }
    return 0;
}
