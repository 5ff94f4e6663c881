#include <iostream>

#include <CLI11.hpp>

#include "medvqa/error.hpp"
#include "medvqa/fixtures.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic fixture set used by the demos and end-to-end tests"};
    std::string out;
    medvqa::fixtures::FixtureOptions opts;
    app.add_option("--out", out, "Fixture root directory")->required();
    app.add_option("--images", opts.num_images, "Number of frames")->check(CLI::PositiveNumber);
    app.add_option("--width", opts.width, "Frame width")->check(CLI::Range(64, 1000));
    app.add_option("--height", opts.height, "Frame height")->check(CLI::Range(64, 1000));
    app.add_option("--seed", opts.seed, "Random seed");
    CLI11_PARSE(app, argc, argv);
    try {
        const auto layout = medvqa::fixtures::write_fixtures(out, opts);
        std::cout << "fixtures written to " << layout.root.string() << "\n";
    } catch (const medvqa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
