# Output files, seeded generators and logging setup
