#pragma once

#include <span>
#include <string>

namespace nsdeform {

double mspe(std::span<const double> predictions, std::span<const double> truths);
double mae(std::span<const double> predictions, std::span<const double> truths);

/// Closed-form CRPS of a N(mean, sd^2) forecast; |y - mean| when sd <= 0.
double crps_gaussian(double mean, double sd, double truth);

/// Negative log predictive density of N(mean, sd^2) at truth. sd must be > 0.
double logs_gaussian(double mean, double sd, double truth);

struct ScoreReport {
  std::string model;
  double mspe = 0.0;
  double mae = 0.0;
  double crps = 0.0;
  double logs = 0.0;
  std::size_t n_test = 0;
};

/// Averages of the four scores over a test set.
ScoreReport score_predictions(std::string model, std::span<const double> means, std::span<const double> sds,
                              std::span<const double> truths);

}  // namespace nsdeform
