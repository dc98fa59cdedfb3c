#pragma once

#include "modad/pipeline.hpp"

namespace fixture {

// Biased synthetic fixture shared by the acceptance run and the directional
// unit tests: K = 5, rho = 0.95, bias blocks far more separable than signal.
inline modad::RunConfig biased_run() {
  modad::RunConfig c;
  auto& s = c.data.spec;
  s.num_classes = 5;
  s.num_bias_attributes = 5;
  s.signal_dim = 5;
  s.bias_dim = 5;
  s.rho = 0.95;
  s.samples_per_class = 1250;
  s.class_separation = 1.5;
  s.bias_separation = 4.0;
  s.noise_std = 1.0;
  s.seed = 7;
  c.data.train_frac = 0.8;
  c.data.val_frac = 0.1;
  c.data.test_bias_mode = modad::TestBiasMode::uniform;
  c.erm.epochs = 10;
  c.erm.batch_size = 64;
  c.gce.epochs = 10;
  c.gce.batch_size = 64;
  c.debias.learning_rate = 1e-4;
  c.debias.epochs = 5;
  c.seeds = {0, 1, 2};
  return c;
}

}  // namespace fixture
