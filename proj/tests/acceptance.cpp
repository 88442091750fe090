// Acceptance suite (filled in after unit calibration).
int main() { return 1; }
