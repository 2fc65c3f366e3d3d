#include <stdio.h>
#define MAX_LEN 10

int main(){
    char word[MAX_LEN] = {0};
    printf("Enter a word: ");
    scanf("%9s", word);
    printf("%s\n", word);
    return 0;
}
