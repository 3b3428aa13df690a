# One module per capability: games, speakers, inference, diagnosis, feedback, harness
