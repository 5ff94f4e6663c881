#include "medvqa/cli/app.hpp"

int main(int argc, char** argv) { return medvqa::cli::run(argc, argv); }
