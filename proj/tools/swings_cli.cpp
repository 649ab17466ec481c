#include "swings/cli/app.hpp"

int main(int argc, char** argv) { return swings::cli::run(argc, argv); }
