#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "midzuno/errors.hpp"
#include "midzuno/population.hpp"
#include "oracles.hpp"

using namespace midzuno;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("midzuno_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Population, RejectsInvalidInput) {
  EXPECT_THROW(Population({1.0, 2.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(Population({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(Population({1.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Population({1.0, -2.0}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Population({1.0, NAN}, {1.0, 2.0}), std::invalid_argument);
}

TEST(PopulationParameters, ConstantStudyVariable) {
  const Population pop({1.0, 1.0, 1.0}, {4.5, 4.5, 4.5});
  const auto params = population_parameters(pop);
  EXPECT_DOUBLE_EQ(params.dispersion_y, 0.0);
  EXPECT_DOUBLE_EQ(params.ratio, 4.5);
  EXPECT_DOUBLE_EQ(params.dispersion_z, 0.0);
}

TEST(PopulationParameters, HandEvaluatedFixture) {
  const Population pop({1, 2, 3, 4}, {2, 3, 5, 7});
  const auto params = population_parameters(pop);
  EXPECT_EQ(params.total_y, 17.0);
  EXPECT_EQ(params.total_x, 10.0);
  EXPECT_EQ(params.ratio, 17.0 / 10.0);
  // z = (0.3, -0.4, -0.1, 0.2), mean 0, S_z^2 = 0.30 / 3.
  EXPECT_NEAR(params.dispersion_z, 0.1, 1e-15);
  const auto z = linearized_residuals(pop);
  EXPECT_NEAR(z[0], 0.3, 1e-15);
  EXPECT_NEAR(z[1], -0.4, 1e-15);
  EXPECT_NEAR(z[2], -0.1, 1e-15);
  EXPECT_NEAR(z[3], 0.2, 1e-15);
}

TEST(PopulationParameters, DispersionUsesNMinusOne) {
  const Population pop({1, 1, 1}, {1, 2, 3});
  EXPECT_DOUBLE_EQ(population_parameters(pop).dispersion_y, 1.0);
}

TEST(PopulationParameters, DispersionsNonNegativeAndZeroOnlyWhenConstant) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t N = 2 + trial % 9;
    auto x = oracle::random_positive(gen, N);
    auto y = oracle::random_positive(gen, N, -3.0, 3.0);
    const auto params = population_parameters(Population(x, y));
    EXPECT_GT(params.dispersion_y, 0.0);
    EXPECT_GE(params.dispersion_z, 0.0);
    EXPECT_NEAR(params.dispersion_y, oracle::sample_var(y),
                1e-12 * (1 + params.dispersion_y));
  }
  // y = c x gives zero linearized dispersion.
  const auto params = population_parameters(Population({1, 2, 4}, {3, 6, 12}));
  EXPECT_NEAR(params.dispersion_z, 0.0, 1e-24);
}

TEST(RescaleToRange, HandEvaluated) {
  const std::vector<double> v{2, 4, 6};
  const auto out = rescale_to_range(v, 1, 20);
  EXPECT_EQ(out, (std::vector<double>{1, 10.5, 20}));
  EXPECT_EQ(rescale_to_range(std::vector<double>{0, 1}, 1, 20),
            (std::vector<double>{1, 20}));
}

TEST(RescaleToRange, IdentityWhenAlreadySpanning) {
  const std::vector<double> v{1, 3.3, 7.77, 20, 12.125};
  EXPECT_EQ(rescale_to_range(v, 1, 20), v);
}

TEST(RescaleToRange, MonotoneAndPinsExtremes) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = oracle::random_positive(gen, 50, -100, 100);
    const auto out = rescale_to_range(v, 1, 20);
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    EXPECT_EQ(*lo, 1.0);
    EXPECT_EQ(*hi, 20.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[i] < v[j]) ASSERT_LE(out[i], out[j]);
      }
    }
  }
}

TEST(RescaleToRange, Errors) {
  EXPECT_THROW(rescale_to_range(std::vector<double>{3, 3, 3}, 1, 20),
               std::invalid_argument);
  EXPECT_THROW(rescale_to_range(std::vector<double>{1, 2}, 5, 5),
               std::invalid_argument);
}

TEST(SigmaForR2, ClosedForm) {
  // Population sd 1: values -1, 1.
  EXPECT_NEAR(sigma_for_r2(std::vector<double>{1, 3}, 0.5), 1.0, 1e-15);
  // Population sd 2: values -2, 2 shifted.
  EXPECT_NEAR(sigma_for_r2(std::vector<double>{3, 7}, 0.8), 1.0, 1e-15);
  EXPECT_LT(sigma_for_r2(std::vector<double>{3, 7}, 1 - 1e-12), 1e-5);
}

TEST(SigmaForR2, Errors) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(sigma_for_r2(x, 0.0), std::invalid_argument);
  EXPECT_THROW(sigma_for_r2(x, 1.0), std::invalid_argument);
  EXPECT_THROW(sigma_for_r2(x, 1.5), std::invalid_argument);
  EXPECT_THROW(sigma_for_r2(std::vector<double>{2, 2}, 0.5),
               std::invalid_argument);
}

TEST(SigmaForR2, ModelR2IdentityHolds) {
  PopulationSpec spec;
  spec.N = 2000;
  spec.seed = 3;
  for (double r2 : {0.1, 0.5, 0.7, 0.95}) {
    spec.target_r2 = r2;
    const Population pop = generate_population(spec);
    const double sigma = sigma_for_r2(pop.x(), r2);
    double m = 0.0;
    for (double v : pop.x()) m += v;
    m /= static_cast<double>(pop.size());
    double var = 0.0;
    for (double v : pop.x()) var += (v - m) * (v - m);
    var /= static_cast<double>(pop.size());
    EXPECT_NEAR(var / (var + sigma * sigma), r2, 1e-12);
  }
}

TEST(GeneratePopulation, DefaultSetup) {
  PopulationSpec spec;  // N=10000, Gamma(2, 5), [1, 20], R^2 0.70
  spec.seed = 1;
  const Population pop = generate_population(spec);
  ASSERT_EQ(pop.size(), 10000u);
  const auto [lo, hi] = std::minmax_element(pop.x().begin(), pop.x().end());
  EXPECT_EQ(*lo, 1.0);
  EXPECT_EQ(*hi, 20.0);
  EXPECT_NEAR(realized_r2(pop), 0.70, 0.03);
}

TEST(GeneratePopulation, Deterministic) {
  PopulationSpec spec;
  spec.N = 500;
  spec.seed = 99;
  const Population a = generate_population(spec);
  const Population b = generate_population(spec);
  EXPECT_TRUE(std::equal(a.x().begin(), a.x().end(), b.x().begin()));
  EXPECT_TRUE(std::equal(a.y().begin(), a.y().end(), b.y().begin()));
  spec.seed = 100;
  const Population c = generate_population(spec);
  EXPECT_FALSE(std::equal(a.x().begin(), a.x().end(), c.x().begin()));
}

TEST(GeneratePopulation, NoiselessLimit) {
  PopulationSpec spec;
  spec.N = 300;
  spec.target_r2 = 1.0 - 1e-15;
  const Population pop = generate_population(spec);
  double max_dev = 0.0;
  for (std::size_t k = 0; k < pop.size(); ++k) {
    max_dev = std::max(max_dev, std::abs(pop.y()[k] - pop.x()[k]));
  }
  EXPECT_LT(max_dev, 1e-5);
  EXPECT_NEAR(realized_r2(pop), 1.0, 1e-12);
}

TEST(GeneratePopulation, MinimalAndInvalidSpecs) {
  PopulationSpec spec;
  spec.N = 2;
  EXPECT_EQ(generate_population(spec).size(), 2u);
  spec.N = 1;
  EXPECT_THROW(generate_population(spec), std::invalid_argument);
  spec.N = 10;
  spec.target_r2 = 1.0;
  EXPECT_THROW(generate_population(spec), std::invalid_argument);
  spec.target_r2 = 0.7;
  spec.x_range = {5, 1};
  EXPECT_THROW(generate_population(spec), std::invalid_argument);
}

TEST(PopulationCsv, LosslessRoundTrip) {
  PopulationSpec spec;
  spec.N = 257;
  spec.seed = 5;
  const Population pop = generate_population(spec);
  const auto path = temp_path("pop.csv");
  save_population_csv(pop, path);
  const Population back = load_population_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), pop.size());
  for (std::size_t k = 0; k < pop.size(); ++k) {
    EXPECT_EQ(back.x()[k], pop.x()[k]);
    EXPECT_EQ(back.y()[k], pop.y()[k]);
  }
}

TEST(PopulationCsv, Errors) {
  EXPECT_THROW(load_population_csv("/nonexistent/dir/pop.csv"), IoError);
  const auto path = temp_path("bad.csv");
  {
    std::ofstream(path) << "id,a,b\n0,1,2\n";
  }
  EXPECT_THROW(load_population_csv(path), std::invalid_argument);
  {
    std::ofstream(path) << "unit,x,y\n0,1,2\n2,1,2\n";
  }
  EXPECT_THROW(load_population_csv(path), std::invalid_argument);
  {
    std::ofstream(path) << "unit,x,y\n0,1,2\n1,abc,2\n";
  }
  EXPECT_THROW(load_population_csv(path), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST(PopulationSpecJson, ParsesAndRoundTrips) {
  const auto spec = population_spec_from_json(
      R"({"N": 100, "gamma_shape": 2, "gamma_scale": 5, "x_range": [1, 20],
          "target_r2": 0.7, "seed": 18446744073709551615})");
  EXPECT_EQ(spec.N, 100u);
  EXPECT_EQ(spec.seed, 18446744073709551615ULL);
  EXPECT_EQ(spec.x_range, (std::pair<double, double>{1, 20}));
  const auto again = population_spec_from_json(population_spec_to_json(spec));
  EXPECT_EQ(again.N, spec.N);
  EXPECT_EQ(again.seed, spec.seed);
  EXPECT_EQ(again.target_r2, spec.target_r2);
}

TEST(PopulationSpecJson, ErrorsNameTheField) {
  auto message = [](const std::string& text) -> std::string {
    try {
      population_spec_from_json(text);
    } catch (const std::invalid_argument& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message(R"({"target_r2": 1.2})").find("target_r2"), std::string::npos);
  EXPECT_NE(message(R"({"N": -4})").find("N"), std::string::npos);
  EXPECT_NE(message(R"({"x_range": [3]})").find("x_range"), std::string::npos);
  EXPECT_NE(message(R"({"gamma_shape": "two"})").find("gamma_shape"),
            std::string::npos);
  EXPECT_FALSE(message("{not json").empty());
}
