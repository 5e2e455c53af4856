#include "app.hpp"

int main(int argc, char** argv) { return deer::cli::run(argc, argv); }
