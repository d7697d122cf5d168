// placeholder until the experiment is tuned
int main(){return 0;}
