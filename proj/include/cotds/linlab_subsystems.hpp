#pragma once

// The two halves of the linear test system as orchestrator sub-systems.
//   A: dXa/dt = la*Xa + Ua, Ya = kb*Xa  (trapezoidal)
//   B: dXb/dt = lb*Xb + Ub, Yb = -ka*Xb (n Euler micro steps)

#include "cotds/cosim.hpp"
#include "cotds/linlab.hpp"

namespace cotds::linlab {

class HalfSystemA final : public cosim::SubSystem {
public:
    HalfSystemA(const LinearCoupledParams& p, double x0) : p_(p), x_(x0) {}

    std::string name() const override { return "A"; }
    std::size_t input_size() const override { return 1; }
    std::vector<std::string> output_names() const override { return {"y"}; }
    void initialize(std::span<const double> inputs) override { u_ = inputs[0]; }
    void set_input(std::span<const double> inputs) override { u_ = inputs[0]; }
    std::vector<double> current_input() const override { return {u_}; }
    void advance(double h) override { x_ = advance_a_trapezoidal(p_.lambda_a(), h, x_, u_); }
    std::vector<double> output() const override { return {p_.k_b() * x_}; }
    std::map<std::string, double> snapshot() const override { return {{"x", x_}}; }

    [[nodiscard]] double state() const noexcept { return x_; }

private:
    LinearCoupledParams p_;
    double x_;
    double u_ = 0.0;
};

class HalfSystemB final : public cosim::SubSystem {
public:
    HalfSystemB(const LinearCoupledParams& p, int n_micro, double x0) : p_(p), n_micro_(n_micro), x_(x0) {}

    std::string name() const override { return "B"; }
    std::size_t input_size() const override { return 1; }
    std::vector<std::string> output_names() const override { return {"y"}; }
    void initialize(std::span<const double> inputs) override { u_ = inputs[0]; }
    void set_input(std::span<const double> inputs) override { u_ = inputs[0]; }
    std::vector<double> current_input() const override { return {u_}; }
    void advance(double h) override {
        x_ = advance_b_euler(p_.lambda_b(), euler_gain(p_.lambda_b(), StepConfig(h, n_micro_)), x_, u_);
    }
    std::vector<double> output() const override { return {-p_.k_a() * x_}; }
    std::map<std::string, double> snapshot() const override { return {{"x", x_}}; }

    [[nodiscard]] double state() const noexcept { return x_; }

private:
    LinearCoupledParams p_;
    int n_micro_;
    double x_;
    double u_ = 0.0;
};

}  // namespace cotds::linlab
