// Build shakeout: touch every public entry point once.

#include <iostream>

#include "solewear/adam.hpp"
#include "solewear/checkpoint.hpp"
#include "solewear/dataset.hpp"
#include "solewear/denoise.hpp"
#include "solewear/gradcheck.hpp"
#include "solewear/image.hpp"
#include "solewear/layers.hpp"
#include "solewear/metrics.hpp"
#include "solewear/network.hpp"
#include "solewear/rng.hpp"
#include "solewear/synth.hpp"
#include "solewear/tensor.hpp"
#include "solewear/train.hpp"

using namespace solewear;

int main() {
    NetworkConfig net;
    net.input_height = 32;
    net.input_width = 32;
    net.channels = {2, 3, 4, 5, 6};
    net.delta_hidden = 4;
    net.delta_channels = 2;
    ModelParams<float> p = build_model<float>(net, 7);

    Image img(net.input_width, net.input_height);
    for (int i = 0; i < img.count(); ++i) img.pixels[i] = (i % 7) / 7.f;
    Image out = predict(p, img, DeltaEncoding::scalar(10));
    std::cout << "predict ok " << out.width << "x" << out.height << "\n";

    OutsoleSpec spec;
    spec.height = 96;
    spec.width = 32;
    spec.block_count = 12;
    WearState st = generate_outsole(spec);
    WearState aged = advance_wear(st, 20);
    Image imp = render_impression(aged);
    std::cout << "render ok logo_contrast=" << logo_contrast(imp, st.features)
              << " dots=" << count_visible_dots(aged) << "\n";

    NoiseSpec ns;
    NoisyImage noisy = add_noise(imp, ns, 5);
    PipelineResult dn = denoise_pipeline(noisy.image, DenoiseParams{});
    std::cout << "denoise ok ssim=" << ssim(dn.image, imp, 8)
              << " psnr=" << psnr(noisy.image, imp).db << "\n";
    return 0;
}
