// Copyright 2026-present the sgh authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Train a 16-bit model on a small Gaussian mixture, compare it with ITQ and
// print Recall10@N for both.

#include <iostream>

#include "sgh/sgh.hpp"

int main() {
    const sgh::Dataset all = sgh::synth_mixture(5100, 32, 10, 1.0, 1);
    const sgh::Dataset base = all.slice(0, 5000);
    const sgh::Dataset queries = all.slice(5000, 100);
    const sgh::Dataset centered = base.centered();

    sgh::TrainConfig cfg;
    cfg.bits = 16;
    cfg.steps = 2000;
    cfg.seed = 1;
    const sgh::TrainResult trained = sgh::train(centered, cfg);
    for (const auto& row : trained.log.rows) {
        std::cout << "step " << row.step << "  loss " << row.window_mean_loss << "  recon "
                  << row.window_mean_recon_error << '\n';
    }

    const sgh::AnyModel sgh_model = sgh::SghModel{trained.params, centered.mean};
    const sgh::AnyModel itq_model = sgh::itq_fit(base, cfg.bits);
    const auto truth = sgh::ground_truth(base, queries, 10, sgh::Metric::L2);

    for (const auto* model : {&sgh_model, &itq_model}) {
        const auto report =
            sgh::recall_curve(sgh::encode_dataset(*model, base), sgh::encode_queries(*model, queries), truth, 10);
        std::cout << sgh::to_string(sgh::kind_of(*model)) << "  recon " << sgh::mean_recon_error(*model, base);
        for (std::size_t n : {10, 100, 1000}) std::cout << "  R10@" << n << ' ' << report.recall_at(n);
        std::cout << '\n';
    }
}
