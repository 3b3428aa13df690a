# Game tables, spec-file schemas and run reports
