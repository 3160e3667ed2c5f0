#include "nsdeform/scoring.hpp"

#include <cmath>
#include <numbers>

#include "nsdeform/errors.hpp"
#include "nsdeform/special.hpp"

namespace nsdeform {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a == 0) throw ParameterError("scores need at least one prediction");
  if (a != b) throw ParameterError("predictions and truths differ in length");
}

}  // namespace

double mspe(std::span<const double> predictions, std::span<const double> truths) {
  check_lengths(predictions.size(), truths.size());
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += (predictions[i] - truths[i]) * (predictions[i] - truths[i]);
  return s / static_cast<double>(predictions.size());
}

double mae(std::span<const double> predictions, std::span<const double> truths) {
  check_lengths(predictions.size(), truths.size());
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - truths[i]);
  return s / static_cast<double>(predictions.size());
}

double crps_gaussian(double mean, double sd, double truth) {
  if (!(sd > 0.0)) return std::abs(truth - mean);
  const double z = (truth - mean) / sd;
  return sd * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - 1.0 / std::sqrt(std::numbers::pi));
}

double logs_gaussian(double mean, double sd, double truth) {
  if (!(sd > 0.0)) throw ParameterError("log score needs a positive predictive sd");
  const double z = (truth - mean) / sd;
  return 0.5 * std::log(2.0 * std::numbers::pi * sd * sd) + 0.5 * z * z;
}

ScoreReport score_predictions(std::string model, std::span<const double> means, std::span<const double> sds,
                              std::span<const double> truths) {
  check_lengths(means.size(), truths.size());
  check_lengths(sds.size(), truths.size());
  ScoreReport r;
  r.model = std::move(model);
  r.n_test = truths.size();
  r.mspe = mspe(means, truths);
  r.mae = mae(means, truths);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    r.crps += crps_gaussian(means[i], sds[i], truths[i]);
    r.logs += logs_gaussian(means[i], sds[i], truths[i]);
  }
  r.crps /= static_cast<double>(r.n_test);
  r.logs /= static_cast<double>(r.n_test);
  return r;
}

}  // namespace nsdeform
