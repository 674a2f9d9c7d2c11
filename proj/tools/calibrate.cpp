// Desk-scale calibration runs. Each mode trains on the synthetic sets and
// prints the validation numbers the acceptance suite pins, plus wall time,
// so thresholds are frozen against measured behavior rather than hope.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "hdrtv/formation.hpp"
#include "hdrtv/models/serialize.hpp"
#include "hdrtv/train.hpp"

using namespace hdrtv;
using Clock = std::chrono::steady_clock;

static double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

static void print_report(const char* tag, const TrainReport& rep, double secs) {
  std::printf("%s: best_val_psnr=%.3f dB at iter %d, train_l1 %.6f -> %.6f, %.1f s\n", tag,
              rep.best_val_psnr, rep.best_iter, rep.train_l1_init, rep.train_l1_final, secs);
  std::fflush(stdout);
}

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "probe";
  const int iters = argc > 2 ? std::atoi(argv[2]) : 0;

  if (mode == "probe") {
    // per-iteration cost at the default geometry
    auto ds = global_set(8, 256, 256, 100);
    TrainConfig cfg;
    cfg.iters = iters > 0 ? iters : 100;
    cfg.val_every = 1000000;
    cfg.log_every = 1000000;
    auto m = Agcm<float>::make(1);
    auto t0 = Clock::now();
    auto rep = train_agcm(m, ds, cfg);
    const double dt = secs_since(t0);
    std::printf("probe: %d iters in %.1f s (%.1f ms/iter) -> 20k extrapolates to %.1f min\n",
                cfg.iters, dt, 1e3 * dt / cfg.iters, dt / cfg.iters * 20000 / 60);
    print_report("probe", rep, dt);
    return 0;
  }

  if (mode == "identity") {
    auto t0 = Clock::now();
    auto ds = identity_set(64, 256, 256, 501);
    std::printf("identity set built in %.1f s\n", secs_since(t0));
    TrainConfig cfg;
    cfg.iters = iters > 0 ? iters : 2000;
    auto m = Agcm<float>::make(1);
    t0 = Clock::now();
    auto rep = train_agcm(m, ds, cfg);
    print_report("identity", rep, secs_since(t0));
    return 0;
  }

  if (mode == "oracle") {
    // Ceiling for any per-pixel map on the global set: invert the standard
    // output pipeline analytically, re-form the wide-gamut output, and score
    // it on the same held-out images the trained runs validate on. The gap
    // to 8-bit quantization and gamut clipping is irreducible, so trained
    // numbers are judged against this, not against perfection.
    auto ds = global_set(64, 256, 256, 502);
    const ToneCurveParams tc = ToneCurveParams::sdr();
    auto invert = [&](const ColorImage& sdr, bool requantize) {
      ColorImage img = sdr;
      eotf_image(img, Transfer::gamma22);
      apply_matrix(img, gamut_matrix(ColorSpace::rec709, ColorSpace::rec2020),
                   ColorSpace::rec2020);
      for (auto& v : img.px) v = tc.inverse(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
      const FormationConfig hc = FormationConfig::hdr();
      hable_tonemap(img, hc.tone);
      oetf_image(img, hc.transfer);
      if (requantize) quantize_image(img, QuantSpec(hc.quant_bits));
      return img;
    };
    auto psnr_img = [](const ColorImage& a, const ColorImage& b) {
      double se = 0;
      for (std::size_t i = 0; i < a.px.size(); i++) {
        const double ai = a.px[i] < 0.0 ? 0.0 : (a.px[i] > 1.0 ? 1.0 : a.px[i]);
        const double d = ai - b.px[i];
        se += d * d;
      }
      return -10.0 * std::log10(se / double(a.px.size()));
    };
    for (bool requantize : {false, true}) {
      double s = 0;
      for (int id = 58; id < 64; id++)  // the 90/10 split holds out the last 6
        s += psnr_img(invert(ds.in[id], requantize), ds.tgt[id]);
      std::printf("oracle(global, %s): val_psnr=%.3f dB\n",
                  requantize ? "requantized" : "continuous", s / 6.0);
    }
    // error split: SDR codes at the clamp rails vs interior, and by target level
    double se_rail = 0, se_in = 0, se_dark = 0, se_lit = 0;
    std::size_t n_rail = 0, n_in = 0, n_dark = 0, n_lit = 0;
    for (int id = 58; id < 64; id++) {
      auto pred = invert(ds.in[id], false);
      const auto& in = ds.in[id];
      const auto& tgt = ds.tgt[id];
      const std::size_t npx = in.npx();
      for (std::size_t p = 0; p < npx; p++) {
        bool rail = false;
        for (int c = 0; c < 3; c++) {
          const double v = in.px[c * npx + p];
          if (v <= 0.0 || v >= 1.0) rail = true;
        }
        for (int c = 0; c < 3; c++) {
          const std::size_t i = c * npx + p;
          const double d = std::clamp(pred.px[i], 0.0, 1.0) - tgt.px[i];
          (rail ? se_rail : se_in) += d * d;
          (rail ? n_rail : n_in)++;
          const bool dark = tgt.px[i] < 0.15;  // bottom of the 10k-nit code axis
          (dark ? se_dark : se_lit) += d * d;
          (dark ? n_dark : n_lit)++;
        }
      }
    }
    auto db = [](double se, std::size_t n) { return -10.0 * std::log10(se / double(n)); };
    std::printf("oracle split: rail %.1f%% of px at %.2f dB, interior %.2f dB\n",
                100.0 * double(n_rail) / double(n_rail + n_in), db(se_rail, n_rail),
                db(se_in, n_in));
    std::printf("oracle split: dark %.1f%% of px at %.2f dB, lit %.2f dB\n",
                100.0 * double(n_dark) / double(n_dark + n_lit), db(se_dark, n_dark),
                db(se_lit, n_lit));
    return 0;
  }

  if (mode == "global") {
    auto t0 = Clock::now();
    auto ds = global_set(64, 256, 256, 502);
    std::printf("global set built in %.1f s\n", secs_since(t0));
    TrainConfig cfg;
    cfg.iters = iters > 0 ? iters : 20000;
    auto m = Agcm<float>::make(1);
    t0 = Clock::now();
    auto rep = train_agcm(m, ds, cfg);
    print_report("global", rep, secs_since(t0));
    save_model("calib_global_agcm.ckpt", m);
    return 0;
  }

  if (mode == "arms") {
    auto t0 = Clock::now();
    auto ds = benchmark_set(64, 256, 256, 503);
    std::printf("benchmark set built in %.1f s\n", secs_since(t0));

    // arm A: mapper first, then the enhancer on its outputs
    TrainConfig acfg;
    acfg.iters = iters > 0 ? iters : 8000;
    auto a = Agcm<float>::make(1);
    t0 = Clock::now();
    auto arep = train_agcm(a, ds, acfg);
    print_report("arms/agcm", arep, secs_since(t0));
    save_model("calib_arms_agcm.ckpt", a);

    t0 = Clock::now();
    auto mapped = map_through_agcm(a, ds);
    std::printf("mapping through: %.1f s\n", secs_since(t0));

    TrainConfig lcfg;
    lcfg.iters = 1500;
    lcfg.batch = 2;
    lcfg.patch = 64;
    auto le = Le<float>::make(2);
    t0 = Clock::now();
    auto lrep = train_le(le, mapped, lcfg);
    print_report("arms/agcm_le", lrep, secs_since(t0));
    save_model("calib_arms_le.ckpt", le);

    // arm B: the same enhancer trained alone, straight on the inputs
    auto solo = Le<float>::make(3);
    t0 = Clock::now();
    auto srep = train_le(solo, ds, lcfg);
    print_report("arms/le_only", srep, secs_since(t0));
    save_model("calib_arms_le_only.ckpt", solo);

    std::printf("arms: margin (agcm_le - le_only) = %.3f dB\n",
                lrep.best_val_psnr - srep.best_val_psnr);
    return 0;
  }

  if (mode == "finetune") {
    auto ds = benchmark_set(64, 256, 256, 503);
    auto a = load_agcm("calib_arms_agcm.ckpt");
    auto le = load_le("calib_arms_le.ckpt");
    TrainConfig cfg;
    cfg.iters = iters > 0 ? iters : 500;
    cfg.batch = 2;
    cfg.patch = 64;
    cfg.lr = 1e-4;
    auto t0 = Clock::now();
    auto rep = joint_finetune(a, le, ds, cfg);
    print_report("finetune", rep, secs_since(t0));
    std::printf("finetune: baseline (chained, iter 0) = %.3f dB, best = %.3f dB at %d\n",
                rep.log.front().val_psnr, rep.best_val_psnr, rep.best_iter);
    return 0;
  }

  std::fprintf(stderr, "unknown mode %s\n", mode.c_str());
  return 2;
}
